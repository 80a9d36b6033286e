#include "ksmith/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "ksmith/error.hpp"
#include "ksmith/fsutil.hpp"

namespace fs = std::filesystem;

namespace ksmith {

using nlohmann::json;

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw Error(Errc::NumericFailure, what + " has non-finite entries");
}

void require_same_shape(const MatrixPair& pair) {
  if (pair.w.rows() != pair.w_prime.rows() || pair.w.cols() != pair.w_prime.cols())
    throw Error(Errc::ShapeMismatch, pair.name + ": " + shape_str(pair.w) + " vs " +
                                         shape_str(pair.w_prime));
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::is_regular_file(path))
    throw Error(Errc::MissingPhase, "no manifest at '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(read_text(path));
  } catch (const json::exception& ex) {
    throw Error(Errc::SchemaViolation, path.string() + ": " + ex.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
    throw Error(Errc::SchemaViolation, path.string() + ": expected {\"entries\": [...]}");

  std::vector<ManifestEntry> out;
  std::set<std::string> names;
  std::map<std::string, std::uintmax_t> file_end;
  for (const auto& e : doc["entries"]) {
    ManifestEntry m;
    try {
      m.name = e.at("name").get<std::string>();
      m.rows = e.at("rows").get<std::size_t>();
      m.cols = e.at("cols").get<std::size_t>();
      m.dtype = e.at("dtype").get<std::string>();
      m.file = e.at("file").get<std::string>();
      m.byte_offset = e.value("byte_offset", std::size_t{0});
    } catch (const json::exception& ex) {
      throw Error(Errc::SchemaViolation, path.string() + ": bad entry: " + ex.what());
    }
    if (m.dtype != "f32")
      throw Error(Errc::SchemaViolation, m.name + ": dtype '" + m.dtype + "' is not f32");
    if (m.rows == 0 || m.cols == 0)
      throw Error(Errc::SchemaViolation, m.name + ": empty shape");
    if (!names.insert(m.name).second)
      throw Error(Errc::SchemaViolation, "duplicate tensor name '" + m.name + "'");
    const fs::path file = dir / m.file;
    std::error_code ec;
    const auto size = fs::file_size(file, ec);
    if (ec) throw Error(Errc::IOFailure, "cannot stat '" + file.string() + "'");
    const std::uintmax_t end = m.byte_offset + m.rows * m.cols * 4;
    if (end > size)
      throw Error(Errc::ShapeMismatch, m.name + ": declared " + std::to_string(m.rows) + "x" +
                                           std::to_string(m.cols) + " at offset " +
                                           std::to_string(m.byte_offset) + " but '" + m.file +
                                           "' holds " + std::to_string(size) + " bytes");
    file_end[m.file] = std::max(file_end[m.file], end);
    out.push_back(std::move(m));
  }
  for (const auto& [file, end] : file_end) {
    const auto size = fs::file_size(dir / file);
    if (end != size)
      throw Error(Errc::ShapeMismatch, "'" + file + "' holds " + std::to_string(size) +
                                           " bytes but the manifest accounts for " +
                                           std::to_string(end));
  }
  return out;
}

std::map<std::string, Matrix> load_tensors(const fs::path& dir) {
  std::map<std::string, Matrix> out;
  std::map<std::string, std::string> cache;
  for (const auto& e : read_manifest(dir)) {
    auto it = cache.find(e.file);
    if (it == cache.end()) it = cache.emplace(e.file, read_text(dir / e.file)).first;
    const auto* bytes = reinterpret_cast<const unsigned char*>(it->second.data()) + e.byte_offset;
    Matrix m(static_cast<Eigen::Index>(e.rows), static_cast<Eigen::Index>(e.cols));
    for (std::size_t r = 0; r < e.rows; ++r) {
      for (std::size_t c = 0; c < e.cols; ++c) {
        const unsigned char* b = bytes + 4 * (r * e.cols + c);
        const std::uint32_t bits = std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 |
                                   std::uint32_t(b[2]) << 16 | std::uint32_t(b[3]) << 24;
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
            static_cast<double>(std::bit_cast<float>(bits));
      }
    }
    out.emplace(e.name, std::move(m));
  }
  return out;
}

void write_tensors(const fs::path& dir, const std::map<std::string, Matrix>& tensors,
                   const std::string& file) {
  std::string blob;
  json entries = json::array();
  for (const auto& [name, m] : tensors) {
    entries.push_back({{"name", name},
                       {"rows", m.rows()},
                       {"cols", m.cols()},
                       {"dtype", "f32"},
                       {"file", file},
                       {"byte_offset", blob.size()}});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(m(r, c)));
        for (int k = 0; k < 4; ++k) blob.push_back(static_cast<char>((bits >> (8 * k)) & 0xff));
      }
    }
  }
  write_text(dir / file, blob);
  write_text(dir / "manifest.json", json{{"entries", entries}}.dump(2) + "\n");
}

std::vector<MatrixPair> load_pairs(const fs::path& pre_dir, const fs::path& post_dir) {
  auto pre = load_tensors(pre_dir);
  auto post = load_tensors(post_dir);
  for (const auto& [name, _] : post)
    if (!pre.contains(name)) throw Error(Errc::MissingPhase, "'" + name + "' has no pre tensor");
  std::vector<MatrixPair> out;
  for (auto& [name, w] : pre) {
    auto it = post.find(name);
    if (it == post.end()) throw Error(Errc::MissingPhase, "'" + name + "' has no post tensor");
    MatrixPair pair{name, std::move(w), std::move(it->second)};
    require_same_shape(pair);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<MatrixPair> load_manifest(const fs::path& root) {
  return load_pairs(root / "pre", root / "post");
}

// ---------------------------------------------------------------------------

std::size_t default_rank(const Matrix& w) noexcept {
  return std::min<std::size_t>(kDefaultSvdRank,
                               static_cast<std::size_t>(std::min(w.rows(), w.cols())));
}

double subspace_alignment(const Matrix& a, const Matrix& b) {
  if (a.cols() == 0 || a.cols() != b.cols() || a.rows() != b.rows())
    throw Error(Errc::ShapeMismatch, "subspace bases " + shape_str(a) + " vs " + shape_str(b));
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i) {
    const double c = std::min(1.0, svd.singularValues()(i));
    sum += c * c;
  }
  return std::clamp(sum / static_cast<double>(a.cols()), 0.0, 1.0);
}

SVDReport svd_diff(const MatrixPair& pair, std::optional<std::size_t> rank, double tol) {
  require_same_shape(pair);
  require_finite(pair.w, pair.name + " (pre)");
  require_finite(pair.w_prime, pair.name + " (post)");
  if (pair.w.isZero(0.0) || pair.w_prime.isZero(0.0))
    throw Error(Errc::DegenerateInput, pair.name + ": zero matrix");
  const auto full = static_cast<std::size_t>(std::min(pair.w.rows(), pair.w.cols()));
  const std::size_t r = rank.value_or(default_rank(pair.w));
  if (r < 1 || r > full)
    throw Error(Errc::InvalidArgument, "rank " + std::to_string(r) + " outside [1, " +
                                           std::to_string(full) + "]");

  Eigen::JacobiSVD<Matrix> a(pair.w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::JacobiSVD<Matrix> b(pair.w_prime, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (a.info() != Eigen::Success || b.info() != Eigen::Success)
    throw Error(Errc::NumericFailure, pair.name + ": SVD did not converge");

  SVDReport rep;
  rep.name = pair.name;
  rep.rank = r;
  const auto& s = a.singularValues();
  const auto& sp = b.singularValues();
  for (std::size_t i = 0; i < r; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    rep.sigma.push_back(s(k));
    rep.sigma_prime.push_back(sp(k));
    if (s(k) < tol * s(0))
      rep.degenerate.push_back(i);
    else
      rep.scaling_ratios.push_back(sp(k) / s(k));
  }
  const auto ri = static_cast<Eigen::Index>(r);
  rep.left_alignment = subspace_alignment(a.matrixU().leftCols(ri), b.matrixU().leftCols(ri));
  rep.right_alignment = subspace_alignment(a.matrixV().leftCols(ri), b.matrixV().leftCols(ri));

  const Matrix recon = b.matrixU() * sp.asDiagonal() * b.matrixV().transpose();
  rep.recon_residual = (recon - pair.w_prime).norm() / pair.w_prime.norm();
  if (!(rep.recon_residual <= tol))
    throw Error(Errc::NumericFailure, pair.name + ": reconstruction residual " +
                                          std::to_string(rep.recon_residual) + " exceeds tolerance");
  return rep;
}

// ---------------------------------------------------------------------------

double linear_cka(const Matrix& x, const Matrix& y) {
  if (x.rows() != y.rows())
    throw Error(Errc::ShapeMismatch, "CKA inputs have " + std::to_string(x.rows()) + " and " +
                                         std::to_string(y.rows()) + " rows");
  if (x.rows() < 2) throw Error(Errc::DegenerateInput, "CKA needs at least two rows");
  require_finite(x, "CKA input X");
  require_finite(y, "CKA input Y");
  const Matrix xc = x.rowwise() - x.colwise().mean();
  const Matrix yc = y.rowwise() - y.colwise().mean();
  const double xx = (xc.transpose() * xc).norm();
  const double yy = (yc.transpose() * yc).norm();
  if (xx == 0.0 || yy == 0.0) throw Error(Errc::DegenerateInput, "CKA input has zero variance");
  const double cross = (yc.transpose() * xc).squaredNorm();
  return std::clamp(cross / (xx * yy), 0.0, 1.0);
}

namespace {

std::vector<double> checked_distribution(std::span<const double> p, double eps) {
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0)
      throw Error(Errc::InvalidDistribution, "probabilities must be finite and non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-3)
    throw Error(Errc::InvalidDistribution, "probabilities sum to " + std::to_string(sum));
  std::vector<double> out(p.begin(), p.end());
  if (eps > 0.0) {
    double total = 0.0;
    for (double& v : out) total += (v = v == 0.0 ? eps : v);
    for (double& v : out) v /= total;
  }
  return out;
}

}  // namespace

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size() || p.empty())
    throw Error(Errc::LengthMismatch, "distributions of length " + std::to_string(p.size()) +
                                          " and " + std::to_string(q.size()));
  if (eps < 0.0) throw Error(Errc::InvalidArgument, "smoothing eps must be >= 0");
  const auto ps = checked_distribution(p, eps);
  const auto qs = checked_distribution(q, eps);
  double kl = 0.0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i] == 0.0) continue;
    if (qs[i] == 0.0) return std::numeric_limits<double>::infinity();
    kl += ps[i] * std::log(ps[i] / qs[i]);
  }
  return std::max(0.0, kl);
}

double kl_mean(const std::vector<std::vector<double>>& p_list,
               const std::vector<std::vector<double>>& q_list, double eps) {
  if (p_list.size() != q_list.size())
    throw Error(Errc::LengthMismatch, "lists of " + std::to_string(p_list.size()) + " and " +
                                          std::to_string(q_list.size()) + " distributions");
  if (p_list.empty()) throw Error(Errc::LengthMismatch, "no distributions");
  double sum = 0.0;
  for (std::size_t i = 0; i < p_list.size(); ++i) sum += kl_divergence(p_list[i], q_list[i], eps);
  return sum / static_cast<double>(p_list.size());
}

double l2_distance(const MatrixPair& pair) {
  require_same_shape(pair);
  return (pair.w_prime - pair.w).norm();
}

double fisher_distance(const MatrixPair& pair, const Matrix& fisher) {
  require_same_shape(pair);
  if (fisher.rows() != pair.w.rows() || fisher.cols() != pair.w.cols())
    throw Error(Errc::ShapeMismatch, pair.name + ": Fisher " + shape_str(fisher) + " vs " +
                                         shape_str(pair.w));
  if ((fisher.array() < 0.0).any())
    throw Error(Errc::NegativeWeight, pair.name + ": Fisher weights must be >= 0");
  const auto d = (pair.w_prime - pair.w).array();
  return std::sqrt((fisher.array() * d * d).sum());
}

std::vector<double> log_minmax(std::span<const double> series, double eps) {
  if (series.size() < 2) throw Error(Errc::ShortSeries, "series needs at least two values");
  if (!(eps > 0.0)) throw Error(Errc::InvalidArgument, "eps must be > 0");
  std::vector<double> logs;
  for (double x : series) {
    if (!(x >= 0.0) || !std::isfinite(x))
      throw Error(Errc::OutOfRange, "series values must be finite and >= 0");
    logs.push_back(std::log10(x + eps));
  }
  const auto [lo, hi] = std::minmax_element(logs.begin(), logs.end());
  const double min = *lo, span = *hi - *lo;
  if (!(span > 0.0)) throw Error(Errc::ConstantSeries, "all values are equal");
  for (double& v : logs) v = (v - min) / span;
  return logs;
}

}  // namespace ksmith
