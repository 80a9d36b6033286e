#pragma once

// End-to-end benchmark generation: one intervention per domain and branch,
// paired pre/post evaluation items, and training statements at each scale.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksmith/kg.hpp"
#include "ksmith/probe_gen.hpp"

namespace ksmith {

/// Pins the intervention fact (and optionally its replacement) for a cell.
struct FactOverride {
  std::string domain;
  Level branch = Level::root;
  FactTriple fact;
  std::optional<std::string> replacement;
};

struct BenchmarkConfig {
  std::vector<std::filesystem::path> kg_paths;
  std::vector<std::string> domains;  // empty: every loaded graph
  std::vector<Level> branches{Level::root, Level::intermediate, Level::leaf};
  std::vector<InterventionMode> modes{InterventionMode::edit, InterventionMode::unlearn};
  std::vector<int> scales{1, 10, 100, 1000, 10000};
  std::size_t eval_probes_per_branch = 100;
  std::uint64_t seed = 0;
  std::string generator = "builtin";  // builtin | llm | mock
  std::optional<std::string> llm_endpoint;
  std::map<ProbeType, double> probe_mix;  // empty: equal weights
  std::size_t templates_per_level = 8;
  std::vector<FactOverride> facts;
  std::optional<std::filesystem::path> output_dir;
};

/// Parses a config document. Relative paths resolve against
/// `base_dir`. Throws ConfigError on unknown keys or bad values.
BenchmarkConfig benchmark_config_from_json(const nlohmann::json& doc,
                                           const std::filesystem::path& base_dir);

/// Largest-remainder split of `total` over the weighted types; ties go to the
/// earlier type in canonical order.
std::map<ProbeType, std::size_t> split_probe_counts(std::size_t total,
                                                    const std::map<ProbeType, double>& weights);

struct BenchmarkCell {
  std::string domain;
  Level branch = Level::root;
  InterventionSpec spec;  // edit form; unlearning reuses item and redirection target
  std::vector<MCQItem> eval_pre;
  std::vector<MCQItem> eval_post;
  std::map<InterventionMode, std::map<int, std::vector<TrainingSample>>> training;
};

struct BenchmarkBundle {
  std::vector<BenchmarkCell> cells;
  nlohmann::ordered_json summary;
};

/// In-memory generation. Every item passes validate_item or generation fails.
BenchmarkBundle build_benchmark(const BenchmarkConfig& cfg, std::size_t jobs = 1);

/// Writes the bundle under `out` through an atomic directory swap.
void write_benchmark(const BenchmarkBundle& bundle, const std::filesystem::path& out, bool force);

BenchmarkBundle generate_benchmark(const BenchmarkConfig& cfg, const std::filesystem::path& out,
                                   bool force, std::size_t jobs = 1);

/// Relative path of a cell directory inside a benchmark tree.
std::filesystem::path cell_dir(const std::string& domain, Level branch);

}  // namespace ksmith
