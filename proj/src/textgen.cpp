#include "ksmith/textgen.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <semaphore>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "ksmith/error.hpp"
#include "ksmith/rng.hpp"

namespace ksmith {

using nlohmann::json;

std::string_view to_string(Finish finish) noexcept {
  switch (finish) {
    case Finish::stop: return "stop";
    case Finish::length: return "length";
    case Finish::error: return "error";
  }
  return "error";
}

void validate_request(const GenRequest& req) {
  if (req.max_tokens < 1) throw Error(Errc::InvalidArgument, "max_tokens must be >= 1");
  if (!(req.temperature >= 0.0)) throw Error(Errc::InvalidArgument, "temperature must be >= 0");
}

// ---------------------------------------------------------------------------
// Mock

namespace {

constexpr std::string_view kOpeners[] = {"What", "Which", "How", "Why", "When", "Where"};
constexpr std::string_view kVerbs[] = {"explains", "shows",   "links",  "shapes",
                                       "defines",  "informs", "limits", "extends"};
constexpr std::string_view kFrames[] = {
    "{opener} detail about the {subject} {verb} what it {relation}?",
    "{opener} fact {verb} how the {subject} {relation} its answer?",
    "{opener} source {verb} that the {subject} {relation} this value?",
    "{opener} record {verb} what the {subject} {relation}?",
};

std::string replace_all(std::string text, std::string_view from, std::string_view to) {
  for (std::size_t pos = text.find(from); pos != std::string::npos;
       pos = text.find(from, pos + to.size())) {
    text.replace(pos, from.size(), to);
  }
  return text;
}

}  // namespace

GenResponse mock_complete(const GenRequest& req, std::uint64_t seed) {
  std::uint64_t h = fnv1a64(req.system);
  h = fnv1a64("\x1e", h);
  h = fnv1a64(req.prompt, h);
  std::uint64_t state = splitmix64(h ^ splitmix64(seed));

  std::ostringstream out;
  char tag[20];
  std::snprintf(tag, sizeof tag, "%016llx", static_cast<unsigned long long>(state));
  out << "# mock " << tag << '\n';
  for (int line = 0; line < 12; ++line) {
    state = splitmix64(state);
    std::string text(kFrames[state % std::size(kFrames)]);
    text = replace_all(text, "{opener}", kOpeners[(state >> 8) % std::size(kOpeners)]);
    text = replace_all(text, "{verb}", kVerbs[(state >> 16) % std::size(kVerbs)]);
    out << text << '\n';
  }
  return GenResponse{out.str(), Finish::stop};
}

// ---------------------------------------------------------------------------
// HTTP client

Endpoint Endpoint::from_env() {
  auto get = [](const char* name) {
    const char* v = std::getenv(name);
    return v ? std::string(v) : std::string();
  };
  Endpoint ep{get("KS_LLM_ENDPOINT"), get("KS_LLM_API_KEY"), get("KS_LLM_MODEL")};
  if (ep.base_url.empty()) throw Error(Errc::ConfigError, "KS_LLM_ENDPOINT is not set");
  if (ep.model.empty()) ep.model = "gpt-4o";
  return ep;
}

struct HttpTextGenerator::Impl {
  Endpoint endpoint;
  RetryPolicy policy;
  std::counting_semaphore<1024> slots;
  std::string host;  // scheme://host:port
  std::string path;

  Impl(Endpoint ep, RetryPolicy p, std::size_t max_in_flight)
      : endpoint(std::move(ep)),
        policy(p),
        slots(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {
    const auto& url = endpoint.base_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
      throw Error(Errc::ConfigError, "endpoint must include a scheme: '" + url + "'");
    auto path_start = url.find('/', scheme_end + 3);
    host = url.substr(0, path_start);
    std::string prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0)
      prefix.resize(prefix.size() - 3);
    path = prefix + "/v1/chat/completions";
  }
};

HttpTextGenerator::HttpTextGenerator(Endpoint endpoint, RetryPolicy policy,
                                     std::size_t max_in_flight)
    : impl_(std::make_unique<Impl>(std::move(endpoint), policy, max_in_flight)) {}

HttpTextGenerator::~HttpTextGenerator() = default;

GenResponse HttpTextGenerator::complete(const GenRequest& req) {
  validate_request(req);
  json messages = json::array();
  if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
  messages.push_back({{"role", "user"}, {"content", req.prompt}});
  json body{{"model", impl_->endpoint.model},
            {"messages", messages},
            {"max_tokens", req.max_tokens},
            {"temperature", req.temperature}};
  if (req.seed) body["seed"] = *req.seed;
  const std::string payload = body.dump();

  httplib::Headers headers;
  if (!impl_->endpoint.api_key.empty())
    headers.emplace("Authorization", "Bearer " + impl_->endpoint.api_key);

  const auto& policy = impl_->policy;
  bool last_was_rate_limit = false;
  std::string last_problem = "no attempt made";
  for (int attempt = 0; attempt < std::max(1, policy.max_attempts); ++attempt) {
    if (attempt > 0) {
      auto delay = policy.base_delay * (1LL << std::min(attempt - 1, 20));
      std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(delay, policy.max_delay));
    }

    httplib::Result res;
    {
      impl_->slots.acquire();
      httplib::Client client(impl_->host);
      client.set_connection_timeout(policy.timeout);
      client.set_read_timeout(policy.timeout);
      res = client.Post(impl_->path, headers, payload, "application/json");
      impl_->slots.release();
    }

    if (!res) {
      last_was_rate_limit = false;
      last_problem = "transport error: " + httplib::to_string(res.error());
      spdlog::debug("completion attempt {} failed: {}", attempt + 1, last_problem);
      continue;
    }
    const int status = res->status;
    if (status == 401 || status == 403)
      throw Error(Errc::AuthFailure, "endpoint rejected credentials (HTTP " +
                                         std::to_string(status) + ")");
    if (status == 429 || status >= 500) {
      last_was_rate_limit = status == 429;
      last_problem = "HTTP " + std::to_string(status);
      spdlog::debug("completion attempt {} got {}", attempt + 1, last_problem);
      continue;
    }
    if (status != 200)
      throw Error(Errc::GenerationFailure, "unexpected HTTP " + std::to_string(status) + ": " +
                                               res->body.substr(0, 200));

    try {
      auto doc = json::parse(res->body);
      const auto& choice = doc.at("choices").at(0);
      GenResponse out;
      out.text = choice.at("message").at("content").get<std::string>();
      std::string finish = choice.value("finish_reason", std::string("stop"));
      out.finish = finish == "length" ? Finish::length : Finish::stop;
      return out;
    } catch (const json::exception& ex) {
      throw Error(Errc::GenerationFailure, std::string("malformed completion body: ") + ex.what());
    }
  }
  if (last_was_rate_limit)
    throw Error(Errc::RateLimited, "still rate limited after " +
                                       std::to_string(policy.max_attempts) + " attempts");
  throw Error(Errc::Unreachable, impl_->host + " unreachable after " +
                                     std::to_string(policy.max_attempts) + " attempts (" +
                                     last_problem + ")");
}

// ---------------------------------------------------------------------------
// Judge

std::string_view default_rubric() noexcept {
  return "You grade a model's answer to a task. Judge whether the answer follows every "
         "instruction in the task and is factually sound. Reply with exactly two lines first:\n"
         "VERDICT: PASS or VERDICT: FAIL\n"
         "SCORE: a number between 0 and 1\n"
         "Then optionally a short rationale.";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool strip_label(std::string_view& line, std::string_view label) {
  if (line.size() < label.size()) return false;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (std::toupper(static_cast<unsigned char>(line[i])) != label[i]) return false;
  }
  line = trim(line.substr(label.size()));
  return true;
}

}  // namespace

std::optional<JudgeVerdict> parse_verdict(std::string_view text, double threshold) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  std::size_t i = 0;
  auto next_line = [&]() -> std::optional<std::string_view> {
    while (i < lines.size()) {
      auto l = trim(lines[i++]);
      if (!l.empty()) return l;
    }
    return std::nullopt;
  };

  auto verdict_line = next_line();
  auto score_line = next_line();
  if (!verdict_line || !score_line) return std::nullopt;
  std::string_view v = *verdict_line, s = *score_line;
  if (!strip_label(v, "VERDICT:") || !strip_label(s, "SCORE:")) return std::nullopt;

  bool pass;
  if (v == "PASS" || v == "pass") pass = true;
  else if (v == "FAIL" || v == "fail") pass = false;
  else return std::nullopt;

  double score = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
  if (ec != std::errc() || ptr != s.data() + s.size() || !(score >= 0.0 && score <= 1.0))
    return std::nullopt;
  if (pass != (score >= threshold)) return std::nullopt;

  std::string rationale;
  for (; i < lines.size(); ++i) {
    if (!rationale.empty()) rationale += '\n';
    rationale += lines[i];
  }
  return JudgeVerdict{pass, score, std::string(trim(rationale))};
}

JudgeVerdict judge_response(TextGenerator& judge, std::string_view task_prompt,
                            std::string_view model_answer, std::string_view rubric,
                            double threshold) {
  if (trim(rubric).empty()) throw Error(Errc::InvalidArgument, "rubric must be non-empty");
  GenRequest req;
  req.system = std::string(rubric);
  req.prompt = "TASK:\n" + std::string(task_prompt) + "\n\nANSWER:\n" + std::string(model_answer);
  req.max_tokens = 256;

  auto first = judge.complete(req);
  if (auto v = parse_verdict(first.text, threshold)) return *v;

  req.prompt += "\n\nYour previous reply could not be parsed. Start with the line "
                "'VERDICT: PASS' or 'VERDICT: FAIL', then the line 'SCORE: <number in [0,1]>'.";
  auto second = judge.complete(req);
  if (auto v = parse_verdict(second.text, threshold)) return *v;
  throw Error(Errc::MalformedVerdict,
              "judge output lacked a verdict twice: '" + second.text.substr(0, 120) + "'");
}

GenResponse MockJudge::complete(const GenRequest&) {
  return GenResponse{pass_all_ ? "VERDICT: PASS\nSCORE: 1.0\nmock judge passes everything"
                               : "VERDICT: FAIL\nSCORE: 0.0\nmock judge fails everything",
                     Finish::stop};
}

}  // namespace ksmith
