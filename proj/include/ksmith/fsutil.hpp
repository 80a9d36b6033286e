#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace ksmith {

/// Fills a fresh sibling directory through `fill`, then swaps it into place.
/// A non-empty `out` without `force` is a ConfigError; on any exception the
/// partial tree is removed and `out` is left untouched.
void write_tree_atomically(const std::filesystem::path& out, bool force,
                           const std::function<void(const std::filesystem::path&)>& fill);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// Runs body(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any worker is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

}  // namespace ksmith
