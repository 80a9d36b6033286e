#pragma once

// Question templates, the six probe types, four-choice item construction,
// data-scale expansion and item quality control.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksmith/kg.hpp"

namespace ksmith {

class TextGenerator;

enum class ProbeType { direct, reverse, conflict, multi_hop, comparison, contextual };
enum class Polarity { positive, preservation };
/// Which fact an item is keyed to, and which model state an answer came from.
enum class Phase { pre, post };
enum class AnswerKind { object, entity };

inline constexpr ProbeType kAllProbeTypes[] = {ProbeType::direct,    ProbeType::reverse,
                                               ProbeType::conflict,  ProbeType::multi_hop,
                                               ProbeType::comparison, ProbeType::contextual};

std::string_view to_string(ProbeType type) noexcept;
std::string_view to_string(Polarity polarity) noexcept;
std::string_view to_string(Phase phase) noexcept;
ProbeType parse_probe_type(std::string_view text);
Polarity parse_polarity(std::string_view text);
Phase parse_phase(std::string_view text);

struct Template {
  std::string text;
  Level level = Level::root;
  std::string style;  // definition / context / role / application, or free

  bool operator==(const Template&) const = default;
};

/// Throws SchemaViolation when the text uses a placeholder other than
/// {subject}, {relation} or {object}, or has unbalanced braces.
void validate_template(const Template& tpl);

/// Relation names are stored snake_case; questions use spaced words.
std::string humanize_relation(std::string_view relation);

std::string render_template(const Template& tpl, const KnowledgeGraph& kg, const FactTriple& fact);

/// The built-in bank for one level, in rotation order.
std::span<const Template> builtin_templates(Level level);

std::vector<Template> instantiate_templates(const KnowledgeGraph& kg, const FactTriple& fact,
                                            Level level, TextGenerator* generator,
                                            std::size_t count, std::uint64_t seed);

struct Probe {
  std::string probe_id;
  std::string fact_id;
  std::string domain;
  Level branch = Level::root;
  ProbeType probe_type = ProbeType::direct;
  Polarity polarity = Polarity::positive;
  std::string question;
  int hop_distance = 0;  // -1 when the referenced node is disconnected
  std::optional<std::string> pair_id;
  std::vector<std::string> tags;

  // Generation metadata; not part of the wire format.
  FactTriple anchor;
  AnswerKind answer_kind = AnswerKind::object;
  std::optional<std::string> answer_pre;
  std::optional<std::string> answer_post;
  std::optional<Phase> fixed_phase;  // set for reverse and conflict variants

  std::optional<std::string> answer_for(Phase phase) const {
    return phase == Phase::pre ? answer_pre : answer_post;
  }
};

struct MCQItem {
  Probe probe;
  std::vector<std::string> options;
  int correct_index = 0;
  Phase keyed_phase = Phase::pre;
};

struct ProbeRequest {
  std::map<ProbeType, std::size_t> counts;
  std::string id_prefix;
};

std::vector<Probe> build_probes(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                std::span<const Template> templates, const ProbeRequest& request,
                                std::uint64_t seed);

/// One probe of each requested type.
std::vector<Probe> build_probes(const KnowledgeGraph& kg, const InterventionSpec& spec,
                                std::span<const Template> templates,
                                const std::set<ProbeType>& types, std::uint64_t seed);

/// Candidate wrong answers for a probe, excluding `correct`, in preference
/// order (contrast answer, then seeded siblings, then numeric offsets).
std::vector<std::string> distractor_candidates(const Probe& probe, const std::string& correct,
                                               const KnowledgeGraph& kg, Phase keyed_phase,
                                               std::uint64_t seed);

MCQItem build_mcq(const Probe& probe, const std::string& correct_answer, const KnowledgeGraph& kg,
                  Phase keyed_phase, std::uint64_t seed);

enum class QCFailure { format, factual, distractor };
std::string_view to_string(QCFailure failure) noexcept;

struct QCResult {
  bool ok = true;
  std::vector<QCFailure> failures;
};

QCResult validate_item(const MCQItem& item, const KnowledgeGraph& kg, const InterventionSpec& spec);

// Probe JSONL wire format.
nlohmann::ordered_json item_to_json(const MCQItem& item);
MCQItem item_from_json(const nlohmann::json& line);  // throws SchemaViolation
std::vector<MCQItem> load_probe_jsonl(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Training-data scale expansion.

inline constexpr int kScaleTags[] = {1, 10, 100, 1000, 10000};
bool is_scale_tag(int k) noexcept;

/// The rendered parts of the fact a training statement expresses.
struct StatementSeed {
  std::string subject;
  std::string relation;
  std::string object;
  std::string fact_id;
};

/// The subject must be a node; the triple itself need not be in the graph.
StatementSeed statement_seed(const KnowledgeGraph& kg, const FactTriple& fact);
std::string canonical_statement(const StatementSeed& seed);

struct TrainingSample {
  std::string text;
  std::string fact_id;
  int scale_tag = 1;
  std::uint64_t variant_seed = 0;
};

/// Rule-based paraphrase material. A variant is one choice from each list;
/// the first entry of every list yields the canonical statement.
struct ParaphraseBank {
  std::vector<std::string> forms;     // use {subject} {relation} {object}
  std::vector<std::string> contexts;  // sentence prefixes, first is ""
  std::vector<std::string> openers;   // first is ""
  std::vector<std::string> closers;   // first is ""

  static ParaphraseBank builtin(const KnowledgeGraph* kg = nullptr);
  std::size_t capacity(std::size_t seeds) const noexcept {
    return seeds * forms.size() * contexts.size() * openers.size() * closers.size();
  }
};

std::vector<TrainingSample> expand_scale(std::span<const StatementSeed> base, int k,
                                         std::uint64_t seed, const ParaphraseBank& bank);

}  // namespace ksmith
