#include "ksmith/fsutil.hpp"

#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <unistd.h>

#include "ksmith/error.hpp"

namespace fs = std::filesystem;

namespace ksmith {

namespace {

fs::path sibling(const fs::path& out, std::string_view tag) {
  auto name = "." + out.filename().string() + "." + std::string(tag) + "-" +
              std::to_string(::getpid());
  return out.parent_path() / name;
}

bool non_empty_dir(const fs::path& p) {
  std::error_code ec;
  if (!fs::exists(p, ec)) return false;
  if (!fs::is_directory(p, ec)) return true;
  return fs::directory_iterator(p, ec) != fs::directory_iterator();
}

}  // namespace

void write_tree_atomically(const fs::path& out_in, bool force,
                           const std::function<void(const fs::path&)>& fill) {
  const fs::path out = fs::absolute(out_in).lexically_normal();
  if (out.filename().empty()) throw Error(Errc::ConfigError, "output path has no name");
  if (non_empty_dir(out) && !force)
    throw Error(Errc::ConfigError,
                "output '" + out.string() + "' exists and is not empty; pass --force");

  std::error_code ec;
  fs::create_directories(out.parent_path(), ec);
  if (ec) throw Error(Errc::IOFailure, "cannot create '" + out.parent_path().string() + "'");
  const fs::path tmp = sibling(out, "tmp");
  fs::remove_all(tmp, ec);
  fs::create_directories(tmp);
  try {
    fill(tmp);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }

  const fs::path old = sibling(out, "old");
  fs::remove_all(old, ec);
  if (fs::exists(out)) fs::rename(out, old);
  fs::rename(tmp, out);
  fs::remove_all(old, ec);
}

void write_text(const fs::path& path, std::string_view text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IOFailure, "cannot write '" + path.string() + "'");
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw Error(Errc::IOFailure, "short write to '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::IOFailure, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i; !stop && (i = next++) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          stop = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first) std::rethrow_exception(first);
}

}  // namespace ksmith
