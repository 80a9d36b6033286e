#include "ksmith/probe_gen.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ksmith/error.hpp"
#include "ksmith/rng.hpp"

namespace ksmith {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(ProbeType type) noexcept {
  switch (type) {
    case ProbeType::direct: return "direct";
    case ProbeType::reverse: return "reverse";
    case ProbeType::conflict: return "conflict";
    case ProbeType::multi_hop: return "multi_hop";
    case ProbeType::comparison: return "comparison";
    case ProbeType::contextual: return "contextual";
  }
  return "direct";
}

std::string_view to_string(Polarity polarity) noexcept {
  return polarity == Polarity::positive ? "positive" : "preservation";
}

std::string_view to_string(Phase phase) noexcept { return phase == Phase::pre ? "pre" : "post"; }

ProbeType parse_probe_type(std::string_view text) {
  for (ProbeType t : kAllProbeTypes)
    if (to_string(t) == text) return t;
  throw Error(Errc::SchemaViolation, "bad probe_type '" + std::string(text) + "'");
}

Polarity parse_polarity(std::string_view text) {
  if (text == "positive") return Polarity::positive;
  if (text == "preservation") return Polarity::preservation;
  throw Error(Errc::SchemaViolation, "bad polarity '" + std::string(text) + "'");
}

Phase parse_phase(std::string_view text) {
  if (text == "pre") return Phase::pre;
  if (text == "post") return Phase::post;
  throw Error(Errc::SchemaViolation, "bad phase '" + std::string(text) + "'");
}

std::string_view to_string(QCFailure failure) noexcept {
  switch (failure) {
    case QCFailure::format: return "format";
    case QCFailure::factual: return "factual";
    case QCFailure::distractor: return "distractor";
  }
  return "format";
}

namespace {

std::string label_of(const KnowledgeGraph& kg, const std::string& id) {
  return kg.has_node(id) ? kg.node(id).label : id;
}

std::string fill(std::string_view pattern, std::initializer_list<std::pair<std::string_view, std::string>> values) {
  std::string out(pattern);
  for (const auto& [key, value] : values) {
    const std::string token = "{" + std::string(key) + "}";
    for (auto pos = out.find(token); pos != std::string::npos;
         pos = out.find(token, pos + value.size()))
      out.replace(pos, token.size(), value);
  }
  return out;
}

std::string_view split_tag(ProbeType type) {
  switch (type) {
    case ProbeType::conflict: return "split:adversarial";
    case ProbeType::contextual: return "split:OOD";
    default: return "split:ID";
  }
}

constexpr std::string_view kQuestionPrefixes[] = {
    "", "Answer the following. ", "Quick check: ", "Choose one. ", "Knowledge probe: ",
    "Select the best option. ", "Consider carefully. ", "One answer is correct. "};

constexpr std::string_view kReverseForms[] = {
    "Which entry completes the fact '___ {relation} {object}'?",
    "Identify the subject: ___ {relation} {object}.",
    "Of the following, which is the one that {relation} {object}?",
    "Which concept matches the description '{relation} {object}'?",
};

constexpr std::string_view kMultiHopForms[] = {
    "Starting from {far} and following its links to the {subject}: the {subject} {relation} "
    "what?",
    "{far} connects through related topics to the {subject}. What does the {subject} "
    "{relation}?",
    "Tracing the chain from {far} to the {subject}, which answer completes: the {subject} "
    "{relation} ___?",
};

constexpr std::string_view kComparisonForms[] = {
    "Is it {a} or {b}: the {subject} {relation} ___?",
    "Which is correct, {a} or {b}, for the statement that the {subject} {relation} ___?",
    "Between {a} and {b}, which value completes: the {subject} {relation} ___?",
};

constexpr std::string_view kConflictForms[] = {
    "Some sources claim the {subject} {relation} {x}, others say {y}. Which is correct?",
    "One account states that the {subject} {relation} {x}; another gives {y}. Which account is "
    "right?",
    "Sources disagree: {x} or {y}? The {subject} {relation} ___.",
};

constexpr std::string_view kContextualForms[] = {
    "Setting aside anything said about the {item}: the {subject} {relation} what?",
    "The {subject} appears in many discussions of {domain}. What does it {relation}?",
    "In a passage about {domain} that also mentions the {item}, the {subject} {relation} which "
    "option?",
};

struct ProbeFactory {
  const KnowledgeGraph& kg;
  const InterventionSpec& spec;
  std::uint64_t seed;
  std::string prefix;

  std::string base_id(ProbeType type, std::size_t i) const {
    char num[16];
    std::snprintf(num, sizeof num, "%03zu", i);
    return prefix + std::string(to_string(type)) + "-" + num;
  }

  Probe skeleton(ProbeType type, std::string id) const {
    Probe p;
    p.probe_id = std::move(id);
    p.fact_id = fact_id(spec.item);
    p.domain = kg.domain();
    p.branch = kg.node(spec.item.subject).level;
    p.probe_type = type;
    p.polarity = type == ProbeType::contextual ? Polarity::preservation : Polarity::positive;
    p.anchor = spec.item;
    p.answer_pre = label_of(kg, spec.item.object);
    if (spec.updated) p.answer_post = label_of(kg, spec.updated->object);
    p.tags = {std::string(split_tag(type)), "relation:" + spec.item.relation};
    return p;
  }

  std::uint64_t rng_for(const std::string& id) const { return derive_seed(seed, id); }
};

const std::string& require_updated(const InterventionSpec& spec, ProbeType type) {
  if (!spec.updated)
    throw Error(Errc::InvalidArgument, std::string(to_string(type)) +
                                           " probes need an updated (redirection) fact");
  return spec.updated->object;
}

bool is_integer(std::string_view s, long long& value) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Literal facts usable for preservation probes, nearest subjects first.
std::vector<std::pair<int, FactTriple>> preservation_facts(const KnowledgeGraph& kg,
                                                           const InterventionSpec& spec) {
  auto dist = hop_distances_from(kg, spec.item.subject);
  std::vector<std::pair<int, FactTriple>> out;
  for (const auto& f : kg.literal_facts()) {
    if (f.subject == spec.item.subject || spec.scope.contains(f.subject)) continue;
    auto it = dist.find(f.subject);
    int d = it == dist.end() ? -1 : static_cast<int>(it->second);
    out.emplace_back(d, f);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    // connected before disconnected, then nearer, then by id
    bool ca = a.first >= 0, cb = b.first >= 0;
    if (ca != cb) return ca;
    if (a.first != b.first) return a.first < b.first;
    return fact_id(a.second) < fact_id(b.second);
  });
  return out;
}

}  // namespace

std::vector<Probe> build_probes(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                std::span<const Template> templates, const ProbeRequest& request,
                                std::uint64_t seed) {
  if (templates.empty()) throw Error(Errc::InvalidArgument, "templates must be non-empty");
  std::size_t total = 0;
  for (const auto& [_, n] : request.counts) total += n;
  if (total == 0) throw Error(Errc::InvalidArgument, "at least one probe type must be requested");
  if (!kg.contains(spec.item))
    throw Error(Errc::UnknownFact, "intervention item " + fact_id(spec.item) + " not in graph");

  ProbeFactory f{kg, spec, seed, request.id_prefix};
  const std::string subject = kg.node(spec.item.subject).label;
  const std::string relation = humanize_relation(spec.item.relation);
  std::vector<Probe> out;

  for (ProbeType type : kAllProbeTypes) {
    auto it = request.counts.find(type);
    const std::size_t n = it == request.counts.end() ? 0 : it->second;
    if (n == 0) continue;

    switch (type) {
      case ProbeType::direct: {
        for (std::size_t i = 0; i < n; ++i) {
          Probe p = f.skeleton(type, f.base_id(type, i));
          const auto& tpl = templates[i % templates.size()];
          const auto round = i / templates.size();
          p.question = std::string(kQuestionPrefixes[round % std::size(kQuestionPrefixes)]) +
                       render_template(tpl, kg, spec.item);
          p.tags.push_back("style:" + tpl.style);
          out.push_back(std::move(p));
        }
        break;
      }
      case ProbeType::reverse: {
        const std::string updated = require_updated(spec, type);
        for (std::size_t i = 0; i < n; ++i) {
          const std::string base = f.base_id(type, i);
          const auto form = kReverseForms[i % std::size(kReverseForms)];
          for (Phase phase : {Phase::pre, Phase::post}) {
            Probe p = f.skeleton(type, base + (phase == Phase::pre ? ".pre" : ".post"));
            p.answer_kind = AnswerKind::entity;
            p.fixed_phase = phase;
            p.anchor = phase == Phase::pre ? spec.item : *spec.updated;
            const std::string object = label_of(kg, p.anchor.object);
            p.question = fill(form, {{"relation", relation}, {"object", object}});
            p.answer_pre.reset();
            p.answer_post.reset();
            (phase == Phase::pre ? p.answer_pre : p.answer_post) = subject;
            out.push_back(std::move(p));
          }
        }
        break;
      }
      case ProbeType::conflict: {
        const std::string original = label_of(kg, spec.item.object);
        const std::string updated = label_of(kg, require_updated(spec, type));
        for (std::size_t i = 0; i < n; ++i) {
          const std::string base = f.base_id(type, i);
          const auto form = kConflictForms[i % std::size(kConflictForms)];
          for (Phase phase : {Phase::pre, Phase::post}) {
            Probe p = f.skeleton(type, base + (phase == Phase::pre ? ".old" : ".new"));
            p.pair_id = base;
            p.fixed_phase = phase;
            const bool old = phase == Phase::pre;
            p.question = fill(form, {{"subject", subject},
                                     {"relation", relation},
                                     {"x", old ? original : updated},
                                     {"y", old ? updated : original}});
            out.push_back(std::move(p));
          }
        }
        break;
      }
      case ProbeType::multi_hop: {
        std::vector<std::pair<std::size_t, std::string>> far;
        for (const auto& [id, d] : hop_distances_from(kg, spec.item.subject))
          if (d >= 2) far.emplace_back(d, id);
        if (far.empty())
          throw Error(Errc::MissingHierarchy, "no node at hop distance >= 2 from '" +
                                                  spec.item.subject + "'");
        std::sort(far.begin(), far.end());
        Rng rng(f.rng_for(f.base_id(type, 0)));
        const std::size_t offset = rng.below(far.size());
        for (std::size_t i = 0; i < n; ++i) {
          const auto& [d, node] = far[(offset + i) % far.size()];
          Probe p = f.skeleton(type, f.base_id(type, i));
          p.hop_distance = static_cast<int>(d);
          p.question = fill(kMultiHopForms[i % std::size(kMultiHopForms)],
                            {{"far", kg.node(node).label}, {"subject", subject},
                             {"relation", relation}});
          p.tags.push_back("via:" + node);
          out.push_back(std::move(p));
        }
        break;
      }
      case ProbeType::comparison: {
        const std::string original = label_of(kg, spec.item.object);
        const std::string updated = label_of(kg, require_updated(spec, type));
        for (std::size_t i = 0; i < n; ++i) {
          Probe p = f.skeleton(type, f.base_id(type, i));
          Rng rng(f.rng_for(p.probe_id));
          const bool swap = rng.below(2) == 1;
          p.question = fill(kComparisonForms[i % std::size(kComparisonForms)],
                            {{"a", swap ? updated : original},
                             {"b", swap ? original : updated},
                             {"subject", subject},
                             {"relation", relation}});
          out.push_back(std::move(p));
        }
        break;
      }
      case ProbeType::contextual: {
        auto facts = preservation_facts(kg, spec);
        // keep only facts that can carry a four-choice item
        std::erase_if(facts, [&](const auto& entry) {
          Probe probe;
          probe.anchor = entry.second;
          probe.probe_id = "check";
          return distractor_candidates(probe, entry.second.object, kg, Phase::pre, seed).size() < 3;
        });
        if (facts.empty())
          throw Error(Errc::MissingHierarchy, "no fact outside the intervention scope in '" +
                                                  kg.domain() + "'");
        for (std::size_t i = 0; i < n; ++i) {
          const auto& [d, fact] = facts[i % facts.size()];
          Probe p = f.skeleton(type, f.base_id(type, i));
          p.fact_id = fact_id(fact);
          p.anchor = fact;
          p.hop_distance = d;
          p.answer_pre = p.answer_post = label_of(kg, fact.object);
          p.tags[1] = "relation:" + fact.relation;
          p.question = fill(kContextualForms[i % std::size(kContextualForms)],
                            {{"item", subject},
                             {"domain", kg.domain()},
                             {"subject", kg.node(fact.subject).label},
                             {"relation", humanize_relation(fact.relation)}});
          out.push_back(std::move(p));
        }
        break;
      }
    }
  }
  return out;
}

std::vector<Probe> build_probes(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                std::span<const Template> templates,
                                const std::set<ProbeType>& types, std::uint64_t seed) {
  if (types.empty()) throw Error(Errc::InvalidArgument, "types must be non-empty");
  ProbeRequest req;
  for (auto t : types) req.counts[t] = 1;
  return build_probes(kg, spec, templates, req, seed);
}

std::vector<std::string> distractor_candidates(const Probe& probe, const std::string& correct,
                                               const KnowledgeGraph& kg, Phase keyed_phase,
                                               std::uint64_t seed) {
  std::vector<std::string> out;
  auto push = [&](const std::string& s) {
    if (!s.empty() && s != correct && std::find(out.begin(), out.end(), s) == out.end())
      out.push_back(s);
  };

  if (auto contrast = probe.answer_for(keyed_phase == Phase::pre ? Phase::post : Phase::pre))
    push(*contrast);

  std::vector<std::string> pool;
  if (probe.answer_kind == AnswerKind::entity) {
    const Level level = kg.node(probe.anchor.subject).level;
    for (const auto& n : kg.nodes())
      if (n.level == level && n.id != probe.anchor.subject) pool.push_back(n.label);
  } else {
    for (const auto& o : sibling_objects(kg, probe.anchor)) pool.push_back(label_of(kg, o));
    pool.push_back(label_of(kg, probe.anchor.object));
  }
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  Rng rng(derive_seed(seed, probe.probe_id + "/distractors/" + std::string(to_string(keyed_phase))));
  rng.shuffle(std::span<std::string>(pool));
  for (const auto& s : pool) push(s);

  long long year = 0;
  if (out.size() < 3 && probe.answer_kind == AnswerKind::object && is_integer(correct, year)) {
    for (long long offset : {-2, 2, -3, 3, -5, 5}) push(std::to_string(year + offset));
  }
  return out;
}

MCQItem build_mcq(const Probe& probe, const std::string& correct_answer, const KnowledgeGraph& kg,
                  Phase keyed_phase, std::uint64_t seed) {
  auto candidates = distractor_candidates(probe, correct_answer, kg, keyed_phase, seed);
  if (candidates.size() < 3)
    throw Error(Errc::DistractorShortage, "probe " + probe.probe_id + " has only " +
                                              std::to_string(candidates.size()) +
                                              " distractor candidates for '" + correct_answer + "'");
  MCQItem item;
  item.probe = probe;
  item.keyed_phase = keyed_phase;
  item.options = {correct_answer, candidates[0], candidates[1], candidates[2]};
  Rng rng(derive_seed(seed, probe.probe_id + "/order/" + std::string(to_string(keyed_phase))));
  rng.shuffle(std::span<std::string>(item.options));
  item.correct_index = static_cast<int>(
      std::find(item.options.begin(), item.options.end(), correct_answer) - item.options.begin());
  return item;
}

QCResult validate_item(const MCQItem& item, const KnowledgeGraph& kg,
                       const InterventionSpec& spec) {
  QCResult r;
  auto fail = [&](QCFailure f) {
    if (std::find(r.failures.begin(), r.failures.end(), f) == r.failures.end())
      r.failures.push_back(f);
  };
  const auto& opts = item.options;
  const bool index_ok = item.correct_index >= 0 &&
                        static_cast<std::size_t>(item.correct_index) < opts.size();

  // format: four non-empty distinct options with one keyed correct
  std::vector<std::string> sorted = opts;
  std::sort(sorted.begin(), sorted.end());
  const bool distinct = std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  const bool non_empty = std::none_of(opts.begin(), opts.end(), [](auto& s) { return s.empty(); });
  if (opts.size() != 4 || !index_ok || !distinct || !non_empty) fail(QCFailure::format);

  // factual: the keyed option must equal the answer implied by the graph and
  // the intervention for the keyed phase
  std::optional<std::string> expected;
  const auto& p = item.probe;
  if (p.probe_type == ProbeType::contextual) {
    if (const FactTriple* f = kg.find_fact(p.fact_id); f && f->subject != spec.item.subject)
      expected = kg.has_node(f->object) ? kg.node(f->object).label : f->object;
  } else if (p.fact_id == fact_id(spec.item) && kg.contains(spec.item)) {
    const FactTriple* keyed = item.keyed_phase == Phase::pre
                                  ? &spec.item
                                  : (spec.updated ? &*spec.updated : nullptr);
    if (keyed) {
      if (p.probe_type == ProbeType::reverse)
        expected = kg.node(keyed->subject).label;
      else
        expected = kg.has_node(keyed->object) ? kg.node(keyed->object).label : keyed->object;
    }
  }
  if (!index_ok || !expected || opts[item.correct_index] != *expected) fail(QCFailure::factual);

  // distractors: none equal to the keyed answer, pairwise distinct
  if (index_ok) {
    std::vector<std::string> wrong;
    for (std::size_t i = 0; i < opts.size(); ++i)
      if (static_cast<int>(i) != item.correct_index) wrong.push_back(opts[i]);
    std::sort(wrong.begin(), wrong.end());
    bool bad = std::adjacent_find(wrong.begin(), wrong.end()) != wrong.end() ||
               std::find(wrong.begin(), wrong.end(), opts[item.correct_index]) != wrong.end();
    if (bad) fail(QCFailure::distractor);
  } else {
    fail(QCFailure::distractor);
  }

  std::sort(r.failures.begin(), r.failures.end());
  r.ok = r.failures.empty();
  return r;
}

ordered_json item_to_json(const MCQItem& item) {
  const auto& p = item.probe;
  ordered_json j;
  j["probe_id"] = p.probe_id;
  j["fact_id"] = p.fact_id;
  j["domain"] = p.domain;
  j["branch"] = to_string(p.branch);
  j["probe_type"] = to_string(p.probe_type);
  j["polarity"] = to_string(p.polarity);
  j["question"] = p.question;
  j["options"] = item.options;
  j["correct_index"] = item.correct_index;
  j["keyed_phase"] = to_string(item.keyed_phase);
  j["hop_distance"] = p.hop_distance;
  j["pair_id"] = p.pair_id ? ordered_json(*p.pair_id) : ordered_json(nullptr);
  j["tags"] = p.tags;
  return j;
}

namespace {

template <typename T>
T field(const json& line, const char* key) {
  auto it = line.find(key);
  if (it == line.end()) throw Error(Errc::SchemaViolation, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::SchemaViolation, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

MCQItem item_from_json(const json& line) {
  if (!line.is_object()) throw Error(Errc::SchemaViolation, "probe line must be an object");
  MCQItem item;
  auto& p = item.probe;
  p.probe_id = field<std::string>(line, "probe_id");
  p.fact_id = field<std::string>(line, "fact_id");
  p.domain = field<std::string>(line, "domain");
  p.branch = parse_level(field<std::string>(line, "branch"));
  p.probe_type = parse_probe_type(field<std::string>(line, "probe_type"));
  p.polarity = parse_polarity(field<std::string>(line, "polarity"));
  p.question = field<std::string>(line, "question");
  item.options = field<std::vector<std::string>>(line, "options");
  if (item.options.size() != 4)
    throw Error(Errc::SchemaViolation, "probe " + p.probe_id + " must have exactly 4 options");
  item.correct_index = field<int>(line, "correct_index");
  if (item.correct_index < 0 || item.correct_index > 3)
    throw Error(Errc::SchemaViolation, "probe " + p.probe_id + " correct_index out of range");
  item.keyed_phase = parse_phase(field<std::string>(line, "keyed_phase"));
  p.hop_distance = field<int>(line, "hop_distance");
  if (auto it = line.find("pair_id"); it != line.end() && !it->is_null())
    p.pair_id = field<std::string>(line, "pair_id");
  if (line.contains("tags")) p.tags = field<std::vector<std::string>>(line, "tags");
  if (p.probe_type == ProbeType::conflict && !p.pair_id)
    throw Error(Errc::SchemaViolation, "conflict probe " + p.probe_id + " lacks pair_id");
  return item;
}

std::vector<MCQItem> load_probe_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot open '" + path.string() + "'");
  std::vector<MCQItem> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(item_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error(Errc::SchemaViolation,
                  path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ex.code(), path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

}  // namespace ksmith
