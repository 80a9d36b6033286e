#include "ksmith/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "ksmith/error.hpp"
#include "ksmith/geometry.hpp"

namespace ksmith {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr double kRuleSlack = 1e-12;

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0))
    throw Error(Errc::OutOfRange, std::string(what) + " = " + std::to_string(v) + " outside [0,1]");
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

std::unordered_map<std::string, const MCQItem*> index_items(std::span<const MCQItem> items) {
  std::unordered_map<std::string, const MCQItem*> out;
  for (const auto& item : items)
    if (!out.emplace(item.probe.probe_id, &item).second)
      throw Error(Errc::SchemaViolation, "duplicate probe id '" + item.probe.probe_id + "'");
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Answers

ordered_json answer_to_json(const AnswerRecord& rec) {
  ordered_json j;
  j["probe_id"] = rec.probe_id;
  j["model_id"] = rec.model_id;
  j["phase"] = to_string(rec.phase);
  j["chosen_index"] = rec.chosen_index;
  j["choice_probs"] = rec.choice_probs ? ordered_json(*rec.choice_probs) : ordered_json(nullptr);
  return j;
}

AnswerRecord answer_from_json(const json& line) {
  if (!line.is_object()) throw Error(Errc::SchemaViolation, "answer line must be an object");
  static const std::set<std::string> known = {"probe_id", "model_id", "phase", "chosen_index",
                                              "choice_probs"};
  for (const auto& [key, _] : line.items())
    if (!known.contains(key)) throw Error(Errc::SchemaViolation, "unknown answer field '" + key + "'");
  AnswerRecord rec;
  try {
    rec.probe_id = line.at("probe_id").get<std::string>();
    rec.model_id = line.at("model_id").get<std::string>();
    rec.phase = parse_phase(line.at("phase").get<std::string>());
    rec.chosen_index = line.at("chosen_index").get<int>();
    if (auto it = line.find("choice_probs"); it != line.end() && !it->is_null()) {
      auto probs = it->get<std::vector<double>>();
      if (probs.size() != 4)
        throw Error(Errc::SchemaViolation, rec.probe_id + ": choice_probs must have 4 entries");
      double sum = 0.0;
      for (double p : probs) {
        if (!std::isfinite(p) || p < 0.0)
          throw Error(Errc::SchemaViolation, rec.probe_id + ": negative or non-finite probability");
        sum += p;
      }
      if (std::abs(sum - 1.0) > 1e-3)
        throw Error(Errc::SchemaViolation,
                    rec.probe_id + ": choice_probs sum to " + std::to_string(sum));
      rec.choice_probs = std::array<double, 4>{probs[0], probs[1], probs[2], probs[3]};
    }
  } catch (const json::exception& ex) {
    throw Error(Errc::SchemaViolation, std::string("bad answer line: ") + ex.what());
  }
  if (rec.chosen_index < 0 || rec.chosen_index > 3)
    throw Error(Errc::SchemaViolation, rec.probe_id + ": chosen_index out of range");
  return rec;
}

std::vector<AnswerRecord> load_answers_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot open '" + path.string() + "'");
  std::vector<AnswerRecord> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(answer_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error(Errc::SchemaViolation,
                  path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    } catch (const Error& ex) {
      throw Error(ex.code(), path.string() + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return out;
}

std::string answers_to_jsonl(std::span<const AnswerRecord> answers) {
  std::string out;
  for (const auto& a : answers) out += answer_to_json(a).dump() + "\n";
  return out;
}

AnswerIndex::AnswerIndex(std::span<const AnswerRecord> answers) {
  for (const auto& a : answers)
    if (!by_id_.emplace(a.probe_id, &a).second)
      throw Error(Errc::SchemaViolation, "probe '" + a.probe_id + "' answered twice");
}

const AnswerRecord* AnswerIndex::find(const std::string& probe_id) const {
  auto it = by_id_.find(probe_id);
  return it == by_id_.end() ? nullptr : it->second;
}

const AnswerRecord& AnswerIndex::at(const std::string& probe_id) const {
  if (auto* a = find(probe_id)) return *a;
  throw Error(Errc::MissingAnswer, "no answer for probe '" + probe_id + "'");
}

std::string_view to_string(Distance d) noexcept {
  return d == Distance::label_change ? "label_change" : "kl";
}

void validate(const EvalConfig& cfg) {
  if (!(cfg.eta_plus >= 0.0)) throw Error(Errc::InvalidArgument, "eta_plus must be >= 0");
  if (!(cfg.epsilon >= 0.0)) throw Error(Errc::InvalidArgument, "epsilon must be >= 0");
  if (!(cfg.collapse_delta > 0.0 && cfg.collapse_delta < 1.0))
    throw Error(Errc::InvalidArgument, "collapse_delta must be in (0,1)");
  if (!(cfg.reverse_floor > 0.0 && cfg.reverse_floor <= 1.0))
    throw Error(Errc::InvalidArgument, "reverse_floor must be in (0,1]");
  if (cfg.radius < 1) throw Error(Errc::InvalidArgument, "radius must be >= 1");
  if (!(cfg.kl_eps >= 0.0)) throw Error(Errc::InvalidArgument, "kl_eps must be >= 0");
  const auto& t = cfg.thresholds;
  for (double v : {t.rr, t.ccr, t.conflict, t.ood, t.instruction_following, t.hallucination})
    if (!(v > 0.0)) throw Error(Errc::InvalidArgument, "failure thresholds must be > 0");
}

std::string split_of(const Probe& probe) {
  for (const auto& tag : probe.tags)
    if (tag.starts_with("split:")) return tag.substr(6);
  switch (probe.probe_type) {
    case ProbeType::conflict: return "adversarial";
    case ProbeType::contextual: return "OOD";
    default: return "ID";
  }
}

// ---------------------------------------------------------------------------
// Scores

double score(std::span<const AnswerRecord> answers, std::span<const MCQItem> key,
             const ItemFilter& filter) {
  const auto items = index_items(key);
  const AnswerIndex index(answers);
  for (const auto& a : answers)
    if (!items.contains(a.probe_id))
      throw Error(Errc::UnknownProbe, "answer names unknown probe '" + a.probe_id + "'");
  std::size_t n = 0, correct = 0;
  for (const auto& item : key) {
    if (filter && !filter(item)) continue;
    ++n;
    if (index.at(item.probe.probe_id).chosen_index == item.correct_index) ++correct;
  }
  if (n == 0) throw Error(Errc::EmptyFilter, "filter selects no probes");
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::set<std::string> related_items(std::span<const MCQItem> items, std::size_t radius) {
  std::set<std::string> out;
  for (const auto& item : items) {
    const int d = item.probe.hop_distance;
    if (d >= 1 && static_cast<std::size_t>(d) <= radius) out.insert(item.probe.probe_id);
  }
  return out;
}

double ccr(std::span<const AnswerRecord> pre, std::span<const AnswerRecord> post,
           const std::set<std::string>& related, Distance distance, double kl_eps) {
  if (related.empty()) throw Error(Errc::EmptyFilter, "related probe set is empty");
  const AnswerIndex a(pre), b(post);
  double total = 0.0;
  for (const auto& id : related) {
    const auto& x = a.at(id);
    const auto& y = b.at(id);
    if (distance == Distance::label_change) {
      total += x.chosen_index != y.chosen_index ? 1.0 : 0.0;
    } else {
      if (!x.choice_probs || !y.choice_probs)
        throw Error(Errc::MissingProbs, "probe '" + id + "' lacks choice_probs");
      total += kl_divergence(*y.choice_probs, *x.choice_probs, kl_eps);
    }
  }
  return total / static_cast<double>(related.size());
}

double rr(std::span<const AnswerRecord> pre, std::span<const AnswerRecord> post,
          const std::set<std::string>& related) {
  if (related.empty()) throw Error(Errc::EmptyFilter, "related probe set is empty");
  const AnswerIndex a(pre), b(post);
  std::size_t same = 0;
  for (const auto& id : related)
    if (a.at(id).chosen_index == b.at(id).chosen_index) ++same;
  return static_cast<double>(same) / static_cast<double>(related.size());
}

double rr_keyed(std::span<const AnswerRecord> post, std::span<const MCQItem> key,
                const std::set<std::string>& related) {
  const auto items = index_items(key);
  const AnswerIndex b(post);
  std::size_t n = 0, kept = 0;
  for (const auto& id : related) {
    auto it = items.find(id);
    if (it == items.end()) throw Error(Errc::UnknownProbe, "related probe '" + id + "' not keyed");
    if (it->second->keyed_phase != Phase::pre) continue;
    ++n;
    if (b.at(id).chosen_index == it->second->correct_index) ++kept;
  }
  if (n == 0) throw Error(Errc::EmptyFilter, "no related probe is keyed to the original fact");
  return static_cast<double>(kept) / static_cast<double>(n);
}

SpreadProxies spread_proxies(double direct_acc, double multihop_acc, InterventionMode mode) {
  require_unit(direct_acc, "direct accuracy");
  require_unit(multihop_acc, "multi-hop accuracy");
  SpreadProxies out;
  if (mode == InterventionMode::edit)
    out.over_spread = 1.0 - multihop_acc;
  else
    out.under_spread = multihop_acc;
  return out;
}

double conflict_rate(std::span<const AnswerRecord> answers, std::span<const MCQItem> key) {
  std::map<std::string, std::pair<const MCQItem*, const MCQItem*>> pairs;
  for (const auto& item : key) {
    if (item.probe.probe_type != ProbeType::conflict) continue;
    if (!item.probe.pair_id)
      throw Error(Errc::UnpairedProbe, "conflict probe '" + item.probe.probe_id + "' lacks pair_id");
    auto& slot = pairs[*item.probe.pair_id];
    auto& member = item.keyed_phase == Phase::pre ? slot.first : slot.second;
    if (member)
      throw Error(Errc::UnpairedProbe, "pair '" + *item.probe.pair_id + "' has two " +
                                           std::string(to_string(item.keyed_phase)) + "-keyed members");
    member = &item;
  }
  if (pairs.empty()) throw Error(Errc::EmptyFilter, "no conflict pairs in the key");
  const AnswerIndex index(answers);
  std::size_t doubled = 0;
  for (const auto& [pid, pair] : pairs) {
    if (!pair.first || !pair.second)
      throw Error(Errc::UnpairedProbe, "pair '" + pid + "' is missing a member");
    const bool old_affirmed = index.at(pair.first->probe.probe_id).chosen_index == pair.first->correct_index;
    const bool new_affirmed = index.at(pair.second->probe.probe_id).chosen_index == pair.second->correct_index;
    if (old_affirmed && new_affirmed) ++doubled;
  }
  return static_cast<double>(doubled) / static_cast<double>(pairs.size());
}

// ---------------------------------------------------------------------------
// Curves

double PlasticityCurve::ceiling() const {
  if (points.empty()) throw Error(Errc::SparseCurve, "empty curve");
  double best = points.front().second;
  for (const auto& [_, acc] : points) best = std::max(best, acc);
  return best;
}

std::vector<PlasticityCurve> plasticity_curves(const std::map<CurveKey, double>& table) {
  std::map<std::tuple<std::string, Level, InterventionMode>, PlasticityCurve> groups;
  for (const auto& [key, acc] : table) {
    require_unit(acc, "accuracy");
    auto& c = groups[{key.domain, key.branch, key.mode}];
    c.domain = key.domain;
    c.branch = key.branch;
    c.mode = key.mode;
    c.points.emplace_back(key.scale, acc);
  }
  std::vector<PlasticityCurve> out;
  for (auto& [_, c] : groups) {
    if (c.points.size() < 2)
      throw Error(Errc::SparseCurve, "curve " + c.domain + "/" + std::string(to_string(c.branch)) +
                                         "/" + std::string(to_string(c.mode)) +
                                         " has a single scale point");
    std::sort(c.points.begin(), c.points.end());
    out.push_back(std::move(c));
  }
  return out;
}

std::optional<int> collapse_point(const PlasticityCurve& direct, const PlasticityCurve& reverse,
                                  const EvalConfig& cfg) {
  validate(cfg);
  if (direct.points.size() != reverse.points.size())
    throw Error(Errc::CurveMismatch, "curves have different lengths");
  for (std::size_t i = 0; i < direct.points.size(); ++i) {
    if (direct.points[i].first != reverse.points[i].first)
      throw Error(Errc::CurveMismatch, "curves disagree on scale tags");
    if (i > 0 && direct.points[i].first <= direct.points[i - 1].first)
      throw Error(Errc::CurveMismatch, "scale tags must be strictly increasing");
  }
  if (direct.points.size() < 2) throw Error(Errc::SparseCurve, "curve has fewer than two points");
  double running_max = direct.points[0].second;
  for (std::size_t i = 1; i < direct.points.size(); ++i) {
    const double acc = direct.points[i].second;
    if (running_max - acc >= cfg.collapse_delta - kRuleSlack &&
        reverse.points[i].second >= cfg.reverse_floor)
      return direct.points[i].first;
    running_max = std::max(running_max, acc);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Failure modes

std::string_view to_string(FailureKind kind) noexcept {
  switch (kind) {
    case FailureKind::under_forgetting: return "under_forgetting";
    case FailureKind::over_spreading: return "over_spreading";
    case FailureKind::conflict_emergence: return "conflict_emergence";
    case FailureKind::knowledge_drift: return "knowledge_drift";
    case FailureKind::instruction_following_drop: return "instruction_following_drop";
    case FailureKind::hallucination_increase: return "hallucination_increase";
  }
  return "under_forgetting";
}

std::vector<FailureMode> classify_failures(const FailureInputs& in, const Baselines& base,
                                           const FailureThresholds& t) {
  for (double v : {t.rr, t.ccr, t.conflict, t.ood, t.instruction_following, t.hallucination})
    if (!(v > 0.0)) throw Error(Errc::InvalidArgument, "failure thresholds must be > 0");

  std::vector<FailureMode> out;
  auto judge = [&](FailureKind kind, double value, double threshold) {
    if (value >= threshold - kRuleSlack)
      out.push_back({kind, clip01((value - threshold) / threshold)});
  };
  auto drop = [&](FailureKind kind, const std::optional<double>& post,
                  const std::optional<double>& pre, double threshold) {
    if (!post) return;
    if (!pre)
      throw Error(Errc::MissingBaseline,
                  "no pre-intervention baseline for " + std::string(to_string(kind)));
    judge(kind, *pre - *post, threshold);
  };

  if (in.mode == InterventionMode::unlearn && in.rr) judge(FailureKind::under_forgetting, *in.rr, t.rr);
  if (in.ccr) judge(FailureKind::over_spreading, *in.ccr, t.ccr);
  if (in.conflict_rate) judge(FailureKind::conflict_emergence, *in.conflict_rate, t.conflict);
  drop(FailureKind::knowledge_drift, in.ood_acc, base.ood_acc, t.ood);
  drop(FailureKind::instruction_following_drop, in.instruction_following,
       base.instruction_following, t.instruction_following);
  drop(FailureKind::hallucination_increase, in.truthfulness, base.truthfulness, t.hallucination);
  return out;
}

Tradeoff tradeoff_report(double id_gain, double ood_pre, double ood_post) {
  if (!(id_gain >= -1.0 && id_gain <= 1.0))
    throw Error(Errc::OutOfRange, "id_gain outside [-1,1]");
  require_unit(ood_pre, "ood_pre");
  require_unit(ood_post, "ood_post");
  return {id_gain, ood_pre - ood_post};
}

// ---------------------------------------------------------------------------
// Report

MetricReport evaluate(std::span<const MCQItem> items, std::span<const AnswerRecord> pre,
                      std::span<const AnswerRecord> post, const EvalConfig& cfg,
                      const EvalExtras& extras) {
  validate(cfg);
  const auto key = index_items(items);
  const AnswerIndex pre_idx(pre), post_idx(post);
  for (auto [log, phase] : {std::pair{&pre, Phase::pre}, std::pair{&post, Phase::post}}) {
    for (const auto& a : *log) {
      if (!key.contains(a.probe_id))
        throw Error(Errc::UnknownProbe, "answer names unknown probe '" + a.probe_id + "'");
      if (a.phase != phase)
        throw Error(Errc::SchemaViolation, "answer for '" + a.probe_id + "' in the " +
                                               std::string(to_string(phase)) + " log has phase " +
                                               std::string(to_string(a.phase)));
    }
  }
  for (const auto& item : items) {
    pre_idx.at(item.probe.probe_id);
    post_idx.at(item.probe.probe_id);
  }

  MetricReport rep;
  rep.mode = cfg.mode;
  rep.distance = cfg.distance;

  std::map<AccuracyKey, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& item : items) {
    for (auto [idx, phase] : {std::pair{&pre_idx, Phase::pre}, std::pair{&post_idx, Phase::post}}) {
      AccuracyKey k{phase, item.keyed_phase, item.probe.probe_type, item.probe.branch,
                    item.probe.domain, split_of(item.probe)};
      auto& [right, n] = counts[k];
      ++n;
      if (idx->at(item.probe.probe_id).chosen_index == item.correct_index) ++right;
    }
  }
  for (const auto& [k, c] : counts)
    rep.accuracy_by[k] = {static_cast<double>(c.first) / static_cast<double>(c.second), c.second};

  const auto related = related_items(items, cfg.radius);
  rep.related_n = related.size();
  if (!related.empty()) {
    rep.ccr = ccr(pre, post, related, cfg.distance, cfg.kl_eps);
    rep.rr = rr(pre, post, related);
    if (cfg.rr_keyed) rep.rr_keyed = rr_keyed(post, items, related);
  }

  // edit is judged against the new fact, unlearning against the forgotten one
  const Phase target = cfg.mode == InterventionMode::edit ? Phase::post : Phase::pre;
  auto post_acc = [&](ProbeType type) -> std::optional<double> {
    std::size_t n = 0, right = 0;
    for (const auto& item : items) {
      if (item.probe.probe_type != type || item.keyed_phase != target) continue;
      ++n;
      if (post_idx.at(item.probe.probe_id).chosen_index == item.correct_index) ++right;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(right) / static_cast<double>(n);
  };
  rep.direct_acc = post_acc(ProbeType::direct);
  rep.multihop_acc = post_acc(ProbeType::multi_hop);
  if (rep.multihop_acc) {
    auto sp = spread_proxies(rep.direct_acc.value_or(0.0), *rep.multihop_acc, cfg.mode);
    rep.over_spread = sp.over_spread;
    rep.under_spread = sp.under_spread;
  }

  const bool has_conflict = std::any_of(items.begin(), items.end(), [](const MCQItem& i) {
    return i.probe.probe_type == ProbeType::conflict;
  });
  if (has_conflict) {
    rep.conflict_rate_pre = conflict_rate(pre, items);
    rep.conflict_rate_post = conflict_rate(post, items);
  }

  std::size_t qp_n = 0, qp_pass = 0, qm_n = 0, qm_pass = 0;
  for (const auto& item : items) {
    const auto& id = item.probe.probe_id;
    if (item.probe.polarity == Polarity::positive && item.keyed_phase == Phase::post) {
      const auto& a = post_idx.at(id);
      double d;
      if (cfg.distance == Distance::kl) {
        if (!a.choice_probs) throw Error(Errc::MissingProbs, "probe '" + id + "' lacks choice_probs");
        d = -std::log(std::max((*a.choice_probs)[static_cast<std::size_t>(item.correct_index)], 1e-300));
      } else {
        d = a.chosen_index == item.correct_index ? 0.0 : 1.0;
      }
      ++qp_n;
      if (d <= cfg.eta_plus) ++qp_pass;
    } else if (item.probe.polarity == Polarity::preservation) {
      const auto& x = pre_idx.at(id);
      const auto& y = post_idx.at(id);
      double d;
      if (cfg.distance == Distance::kl) {
        if (!x.choice_probs || !y.choice_probs)
          throw Error(Errc::MissingProbs, "probe '" + id + "' lacks choice_probs");
        d = kl_divergence(*y.choice_probs, *x.choice_probs, cfg.kl_eps);
      } else {
        d = x.chosen_index == y.chosen_index ? 0.0 : 1.0;
      }
      ++qm_n;
      if (d <= cfg.epsilon) ++qm_pass;
    }
  }
  if (qp_n) rep.q_plus_pass_rate = static_cast<double>(qp_pass) / static_cast<double>(qp_n);
  if (qm_n) rep.q_minus_pass_rate = static_cast<double>(qm_pass) / static_cast<double>(qm_n);

  if (extras.curves) rep.collapse_scale = collapse_point(extras.curves->first, extras.curves->second, cfg);

  // OOD accuracy per model phase over the original-keyed OOD items
  auto ood_acc = [&](const AnswerIndex& idx) -> std::optional<double> {
    std::size_t n = 0, right = 0;
    for (const auto& item : items) {
      if (split_of(item.probe) != "OOD" || item.keyed_phase != Phase::pre) continue;
      ++n;
      if (idx.at(item.probe.probe_id).chosen_index == item.correct_index) ++right;
    }
    if (n == 0) return std::nullopt;
    return static_cast<double>(right) / static_cast<double>(n);
  };
  FailureInputs fin{cfg.mode, rep.rr, rep.ccr, rep.conflict_rate_post, ood_acc(post_idx),
                    extras.instruction_following_post, extras.truthfulness_post};
  Baselines base = extras.baselines;
  if (!base.ood_acc) base.ood_acc = ood_acc(pre_idx);
  rep.failure_modes = classify_failures(fin, base, cfg.thresholds);
  return rep;
}

namespace {

ordered_json opt(const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); }

}  // namespace

ordered_json report_to_json(const MetricReport& r) {
  ordered_json j;
  j["mode"] = to_string(r.mode);
  j["distance"] = to_string(r.distance);
  ordered_json acc = ordered_json::array();
  for (const auto& [k, c] : r.accuracy_by) {
    ordered_json row;
    row["model_phase"] = to_string(k.model_phase);
    row["keyed_phase"] = to_string(k.keyed_phase);
    row["probe_type"] = to_string(k.probe_type);
    row["branch"] = to_string(k.branch);
    row["domain"] = k.domain;
    row["split"] = k.split;
    row["value"] = c.value;
    row["n"] = c.n;
    acc.push_back(row);
  }
  j["accuracy"] = acc;
  j["related_n"] = r.related_n;
  j["ccr"] = opt(r.ccr);
  j["rr"] = opt(r.rr);
  j["rr_keyed"] = opt(r.rr_keyed);
  j["direct_acc"] = opt(r.direct_acc);
  j["multihop_acc"] = opt(r.multihop_acc);
  j["over_spread"] = opt(r.over_spread);
  j["under_spread"] = opt(r.under_spread);
  j["conflict_rate"] = {{"pre", opt(r.conflict_rate_pre)}, {"post", opt(r.conflict_rate_post)}};
  j["q_plus_pass_rate"] = opt(r.q_plus_pass_rate);
  j["q_minus_pass_rate"] = opt(r.q_minus_pass_rate);
  j["collapse_scale"] = r.collapse_scale ? ordered_json(*r.collapse_scale) : ordered_json(nullptr);
  ordered_json fm = ordered_json::array();
  for (const auto& f : r.failure_modes)
    fm.push_back({{"kind", to_string(f.kind)}, {"severity", f.severity}});
  j["failure_modes"] = fm;
  return j;
}

std::string report_to_csv(const MetricReport& r) {
  std::string out = "metric,model_phase,keyed_phase,probe_type,branch,domain,split,value,n\n";
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  for (const auto& [k, c] : r.accuracy_by)
    out += fmt::format("accuracy,{},{},{},{},{},{},{},{}\n", to_string(k.model_phase),
                       to_string(k.keyed_phase), to_string(k.probe_type), to_string(k.branch),
                       quote(k.domain), quote(k.split), c.value, c.n);
  auto scalar = [&](std::string_view name, const std::optional<double>& v, std::string_view phase,
                    std::optional<std::size_t> n) {
    if (!v) return;
    out += fmt::format("{},{},,,,,,{},{}\n", name, phase, *v, n ? std::to_string(*n) : "");
  };
  scalar("ccr", r.ccr, "", r.related_n);
  scalar("rr", r.rr, "", r.related_n);
  scalar("rr_keyed", r.rr_keyed, "", std::nullopt);
  scalar("direct_acc", r.direct_acc, "post", std::nullopt);
  scalar("multihop_acc", r.multihop_acc, "post", std::nullopt);
  scalar("over_spread", r.over_spread, "", std::nullopt);
  scalar("under_spread", r.under_spread, "", std::nullopt);
  scalar("conflict_rate", r.conflict_rate_pre, "pre", std::nullopt);
  scalar("conflict_rate", r.conflict_rate_post, "post", std::nullopt);
  scalar("q_plus_pass_rate", r.q_plus_pass_rate, "post", std::nullopt);
  scalar("q_minus_pass_rate", r.q_minus_pass_rate, "", std::nullopt);
  if (r.collapse_scale) out += fmt::format("collapse_scale,,,,,,,{},\n", *r.collapse_scale);
  for (const auto& f : r.failure_modes)
    out += fmt::format("failure:{},,,,,,,{},\n", to_string(f.kind), f.severity);
  return out;
}

}  // namespace ksmith
