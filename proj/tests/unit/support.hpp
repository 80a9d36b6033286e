#pragma once

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ksmith/error.hpp"
#include "ksmith/kg.hpp"
#include "ksmith/rng.hpp"

namespace ksmith::test {

inline std::filesystem::path source_dir() { return KSMITH_SOURCE_DIR; }
inline std::filesystem::path data_kg(const std::string& domain) {
  return source_dir() / "data" / "kg" / (domain + ".json");
}
inline std::filesystem::path fixture(const std::string& rel) {
  return source_dir() / "tests" / "fixtures" / rel;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ksmith-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

/// Every regular file below `root`, as relative path and contents.
inline std::vector<std::pair<std::string, std::string>> tree(const std::filesystem::path& root) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root))
    if (e.is_regular_file())
      out.emplace_back(std::filesystem::relative(e.path(), root).string(), slurp(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

/// The error code `fn` throws; a test failure when it returns normally.
inline Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return Errc::ConfigError;
}

/// R -> I -> L with a literal fact on I.
inline KnowledgeGraph chain_graph() {
  return KnowledgeGraph("toy",
                        {{"R", "root topic", Level::root, "toy"},
                         {"I", "middle topic", Level::intermediate, "toy"},
                         {"L", "leaf topic", Level::leaf, "toy"}},
                        {{"R", "includes", "I"}, {"I", "applied_in", "L"}, {"I", "dated_to", "1900"}});
}

/// Random three-level forest with `n` nodes, a few isolated ones, and
/// literal facts sprinkled on top.
inline KnowledgeGraph random_forest(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<KGNode> nodes;
  std::vector<FactTriple> edges;
  std::vector<std::string> roots, mids;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string id = "n" + std::to_string(i);
    Level level = i == 0 ? Level::root : static_cast<Level>(rng.below(3));
    if (level == Level::intermediate && roots.empty()) level = Level::root;
    if (level == Level::leaf && mids.empty()) level = Level::root;
    nodes.push_back({id, "label " + id, level, "rand"});
    const bool isolated = rng.below(8) == 0;
    if (level == Level::root) {
      roots.push_back(id);
    } else if (level == Level::intermediate) {
      mids.push_back(id);
      if (!isolated) edges.push_back({roots[rng.below(roots.size())], "includes", id});
    } else if (!isolated) {
      edges.push_back({mids[rng.below(mids.size())], "applied_in", id});
    }
    if (rng.below(3) == 0) edges.push_back({id, "dated_to", std::to_string(1800 + rng.below(200))});
  }
  return KnowledgeGraph("rand", std::move(nodes), std::move(edges));
}

}  // namespace ksmith::test
