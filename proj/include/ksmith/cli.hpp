#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ksmith/metrics.hpp"
#include "ksmith/probe_gen.hpp"

namespace ksmith {

/// Entry point of the `ksmith` binary. Writes one JSON document to `out`,
/// diagnostics to `err`, and returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Parses the "eval" section of a config document (missing section: defaults).
EvalConfig eval_config_from_json(const nlohmann::json& doc);
EvalExtras eval_extras_from_json(const nlohmann::json& doc);

/// Items from probe JSONL files; a directory contributes every eval_*.jsonl
/// below it in path order.
std::vector<MCQItem> load_probe_inputs(const std::vector<std::filesystem::path>& paths);

/// Built-in answerers. faithful-pre selects the option equal to the probe's
/// original-fact answer, faithful-post the option equal to its updated-fact
/// answer. Without such an answer the lowest option that is not the other
/// phase's answer is chosen. Items read back from JSONL carry no answers; for
/// those the keyed option is chosen when the keyed phase matches the model.
enum class MockModel { faithful_pre, faithful_post };
std::string_view to_string(MockModel model) noexcept;

std::vector<AnswerRecord> mock_answers(std::span<const MCQItem> items, MockModel model,
                                       Phase phase);

}  // namespace ksmith
