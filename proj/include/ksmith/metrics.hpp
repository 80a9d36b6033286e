#pragma once

// Scoring of answer logs against probe keys: accuracies, propagation
// (CCR/RR and spread proxies), conflict rate, collapse detection, plasticity
// curves and failure-mode classification.

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksmith/kg.hpp"
#include "ksmith/probe_gen.hpp"

namespace ksmith {

struct AnswerRecord {
  std::string probe_id;
  std::string model_id;
  Phase phase = Phase::pre;
  int chosen_index = 0;
  std::optional<std::array<double, 4>> choice_probs;
};

// Answers JSONL wire format.
nlohmann::ordered_json answer_to_json(const AnswerRecord& rec);
AnswerRecord answer_from_json(const nlohmann::json& line);  // throws SchemaViolation
std::vector<AnswerRecord> load_answers_jsonl(const std::filesystem::path& path);
std::string answers_to_jsonl(std::span<const AnswerRecord> answers);

/// Answers of one phase indexed by probe id. Duplicate ids are SchemaViolation.
class AnswerIndex {
 public:
  explicit AnswerIndex(std::span<const AnswerRecord> answers);
  const AnswerRecord* find(const std::string& probe_id) const;
  const AnswerRecord& at(const std::string& probe_id) const;  // throws MissingAnswer
  std::size_t size() const noexcept { return by_id_.size(); }
  const std::unordered_map<std::string, const AnswerRecord*>& all() const noexcept { return by_id_; }

 private:
  std::unordered_map<std::string, const AnswerRecord*> by_id_;
};

enum class Distance { label_change, kl };
std::string_view to_string(Distance d) noexcept;

struct FailureThresholds {
  double rr = 0.5;
  double ccr = 0.3;
  double conflict = 0.2;
  double ood = 0.05;
  double instruction_following = 0.10;
  double hallucination = 0.05;
};

struct EvalConfig {
  double eta_plus = 0.5;
  double epsilon = 0.05;
  Distance distance = Distance::label_change;
  double collapse_delta = 0.10;
  double reverse_floor = 0.50;
  std::size_t radius = 2;
  InterventionMode mode = InterventionMode::edit;
  bool rr_keyed = false;  // also report RR against the original-fact key
  double kl_eps = 1e-6;
  FailureThresholds thresholds;
};

/// Throws InvalidArgument when a field is outside its documented range.
void validate(const EvalConfig& cfg);

/// "split:X" tag if present, otherwise adversarial for conflict, OOD for
/// contextual and ID for everything else.
std::string split_of(const Probe& probe);

using ItemFilter = std::function<bool(const MCQItem&)>;

/// Fraction of filtered items answered correctly. Every answer must name a
/// keyed probe and every filtered item must be answered.
double score(std::span<const AnswerRecord> answers, std::span<const MCQItem> key,
             const ItemFilter& filter);

/// Item ids with 1 <= hop_distance <= radius.
std::set<std::string> related_items(std::span<const MCQItem> items, std::size_t radius);

double ccr(std::span<const AnswerRecord> pre, std::span<const AnswerRecord> post,
           const std::set<std::string>& related, Distance distance,
           double kl_eps = 1e-6);
double rr(std::span<const AnswerRecord> pre, std::span<const AnswerRecord> post,
          const std::set<std::string>& related);

/// Fraction of related items whose post answer still selects the keyed option.
double rr_keyed(std::span<const AnswerRecord> post, std::span<const MCQItem> key,
                const std::set<std::string>& related);

struct SpreadProxies {
  std::optional<double> over_spread;
  std::optional<double> under_spread;
};

SpreadProxies spread_proxies(double direct_acc, double multihop_acc, InterventionMode mode);

/// Fraction of conflict pairs where the old-keyed and the new-keyed member are
/// both answered with their keyed option.
double conflict_rate(std::span<const AnswerRecord> answers, std::span<const MCQItem> key);

struct PlasticityCurve {
  Level branch = Level::root;
  std::string domain;
  InterventionMode mode = InterventionMode::edit;
  std::vector<std::pair<int, double>> points;  // strictly increasing scale

  double ceiling() const;
};

struct CurveKey {
  int scale = 1;
  Level branch = Level::root;
  std::string domain;
  InterventionMode mode = InterventionMode::edit;

  auto operator<=>(const CurveKey&) const = default;
};

std::vector<PlasticityCurve> plasticity_curves(const std::map<CurveKey, double>& table);

std::optional<int> collapse_point(const PlasticityCurve& direct, const PlasticityCurve& reverse,
                                  const EvalConfig& cfg);

enum class FailureKind {
  under_forgetting,
  over_spreading,
  conflict_emergence,
  knowledge_drift,
  instruction_following_drop,
  hallucination_increase,
};
std::string_view to_string(FailureKind kind) noexcept;

struct FailureMode {
  FailureKind kind;
  double severity = 0.0;
};

/// The metric values the classifier reads; absent values are not judged.
struct FailureInputs {
  InterventionMode mode = InterventionMode::edit;
  std::optional<double> rr;
  std::optional<double> ccr;
  std::optional<double> conflict_rate;
  std::optional<double> ood_acc;
  std::optional<double> instruction_following;
  std::optional<double> truthfulness;
};

/// Pre-intervention scores for the drop-based categories.
struct Baselines {
  std::optional<double> ood_acc;
  std::optional<double> instruction_following;
  std::optional<double> truthfulness;
};

std::vector<FailureMode> classify_failures(const FailureInputs& inputs, const Baselines& baselines,
                                           const FailureThresholds& thresholds);

struct Tradeoff {
  double id_gain = 0.0;
  double ood_drift = 0.0;  // ood_pre - ood_post; negative when OOD improved
};

Tradeoff tradeoff_report(double id_gain, double ood_pre, double ood_post);

// ---------------------------------------------------------------------------

struct AccuracyKey {
  Phase model_phase = Phase::pre;
  Phase keyed_phase = Phase::pre;
  ProbeType probe_type = ProbeType::direct;
  Level branch = Level::root;
  std::string domain;
  std::string split;

  auto operator<=>(const AccuracyKey&) const = default;
};

struct AccuracyCell {
  double value = 0.0;
  std::size_t n = 0;
};

struct MetricReport {
  InterventionMode mode = InterventionMode::edit;
  Distance distance = Distance::label_change;
  std::map<AccuracyKey, AccuracyCell> accuracy_by;
  std::size_t related_n = 0;
  std::optional<double> ccr;
  std::optional<double> rr;
  std::optional<double> rr_keyed;
  std::optional<double> direct_acc;
  std::optional<double> multihop_acc;
  std::optional<double> over_spread;
  std::optional<double> under_spread;
  std::optional<double> conflict_rate_pre;
  std::optional<double> conflict_rate_post;
  std::optional<double> q_plus_pass_rate;   // distance to keyed answer <= eta_plus
  std::optional<double> q_minus_pass_rate;  // pre/post drift <= epsilon
  std::optional<int> collapse_scale;
  std::vector<FailureMode> failure_modes;
};

/// Extra inputs an evaluation may carry beyond the two answer logs.
struct EvalExtras {
  std::optional<std::pair<PlasticityCurve, PlasticityCurve>> curves;  // direct, reverse
  Baselines baselines;
  std::optional<double> instruction_following_post;
  std::optional<double> truthfulness_post;
};

/// Full report over a probe key answered once per phase.
MetricReport evaluate(std::span<const MCQItem> items, std::span<const AnswerRecord> pre,
                      std::span<const AnswerRecord> post, const EvalConfig& cfg,
                      const EvalExtras& extras = {});

nlohmann::ordered_json report_to_json(const MetricReport& report);

/// One row per metric cell:
/// metric,model_phase,keyed_phase,probe_type,branch,domain,split,value,n
std::string report_to_csv(const MetricReport& report);

}  // namespace ksmith
