#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace ksmith::cli {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
};

struct GenerateArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

struct EvaluateArgs {
  std::vector<std::filesystem::path> probes;
  std::filesystem::path pre;
  std::filesystem::path post;
  std::optional<std::filesystem::path> config;
  std::filesystem::path out;
  std::optional<std::string> mode;
  bool force = false;
};

struct GeometryArgs {
  std::filesystem::path pre;
  std::filesystem::path post;
  std::optional<std::filesystem::path> fisher;
  std::optional<std::filesystem::path> pre_answers;
  std::optional<std::filesystem::path> post_answers;
  std::filesystem::path out;
  std::optional<std::size_t> rank;
  double tol = 1e-6;
  bool force = false;
};

struct MockRunArgs {
  std::filesystem::path config;
  std::optional<std::filesystem::path> out;
  bool force = false;
};

/// Each command returns the JSON document for stdout plus an exit code.
struct Outcome {
  nlohmann::ordered_json doc;
  int code = 0;
};

Outcome cmd_generate(const GenerateArgs& args, const Globals& g);
Outcome cmd_evaluate(const EvaluateArgs& args, const Globals& g);
Outcome cmd_geometry(const GeometryArgs& args, const Globals& g);
Outcome cmd_mock_run(const MockRunArgs& args, const Globals& g);

/// Reads a JSON config; a missing or unparsable file is ConfigError.
nlohmann::json read_config(const std::filesystem::path& path);

/// Fails with ConfigError when `out` is a non-empty directory and not forced.
void require_writable(const std::filesystem::path& out, bool force);

}  // namespace ksmith::cli
