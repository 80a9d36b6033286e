#pragma once

// Text generation clients: an OpenAI-compatible chat-completions client with
// retry and bounded concurrency, a deterministic offline mock, and an
// LLM-as-judge wrapper with a line-oriented verdict contract.

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace ksmith {

struct GenRequest {
  std::string system;
  std::string prompt;
  unsigned max_tokens = 256;
  double temperature = 0.0;
  std::optional<std::int64_t> seed;
};

enum class Finish { stop, length, error };
std::string_view to_string(Finish finish) noexcept;

struct GenResponse {
  std::string text;
  Finish finish = Finish::stop;
};

/// Throws InvalidArgument when max_tokens is zero or temperature negative.
void validate_request(const GenRequest& req);

class TextGenerator {
 public:
  virtual ~TextGenerator() = default;
  virtual GenResponse complete(const GenRequest& req) = 0;
};

/// Deterministic function of (system, prompt, seed). Output is a "# mock <hex>"
/// header line followed by question templates ending in '?'.
GenResponse mock_complete(const GenRequest& req, std::uint64_t seed);

class MockTextGenerator final : public TextGenerator {
 public:
  explicit MockTextGenerator(std::uint64_t seed) : seed_(seed) {}
  GenResponse complete(const GenRequest& req) override { return mock_complete(req, seed_); }

 private:
  std::uint64_t seed_;
};

struct Endpoint {
  std::string base_url;  // scheme://host[:port][/prefix]
  std::string api_key;
  std::string model;

  /// Reads KS_LLM_ENDPOINT, KS_LLM_API_KEY and KS_LLM_MODEL.
  static Endpoint from_env();
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};
  std::chrono::seconds timeout{60};
};

// Shareable across threads. At most `max_in_flight` requests are outstanding
// at any time; extra callers block until a slot frees.
class HttpTextGenerator final : public TextGenerator {
 public:
  HttpTextGenerator(Endpoint endpoint, RetryPolicy policy = {}, std::size_t max_in_flight = 4);
  ~HttpTextGenerator() override;

  GenResponse complete(const GenRequest& req) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct JudgeVerdict {
  bool pass = false;
  double score = 0.0;
  std::string rationale;
};

inline constexpr double kDefaultJudgeThreshold = 0.5;

/// Default grading rubric for open-ended stress tasks.
std::string_view default_rubric() noexcept;

/// Parses "VERDICT: PASS|FAIL" then "SCORE: <0..1>" from the first two
/// non-empty lines; remaining lines are the rationale. Empty on any mismatch,
/// including a verdict that disagrees with the score under `threshold`.
std::optional<JudgeVerdict> parse_verdict(std::string_view text, double threshold);

/// Malformed output earns one reprompt; a second failure is MalformedVerdict.
JudgeVerdict judge_response(TextGenerator& judge, std::string_view task_prompt,
                            std::string_view model_answer, std::string_view rubric,
                            double threshold = kDefaultJudgeThreshold);

/// Offline judge that always passes or always fails.
class MockJudge final : public TextGenerator {
 public:
  explicit MockJudge(bool pass_all) : pass_all_(pass_all) {}
  GenResponse complete(const GenRequest& req) override;

 private:
  bool pass_all_;
};

}  // namespace ksmith
