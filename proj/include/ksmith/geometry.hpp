#pragma once

// Weight-geometry analysis of pre/post parameter matrices and similarity
// measures over representations and output distributions.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ksmith {

using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Tensor exchange: manifest.json plus raw little-endian float32, row-major.

struct ManifestEntry {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::string dtype = "f32";
  std::string file;
  std::size_t byte_offset = 0;
};

/// Parses and checks `dir/manifest.json` against the files it references.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& dir);

/// Every tensor named in `dir/manifest.json`, keyed by name.
std::map<std::string, Matrix> load_tensors(const std::filesystem::path& dir);

/// Writes all matrices back to back into `dir/<file>` with a matching manifest.
void write_tensors(const std::filesystem::path& dir, const std::map<std::string, Matrix>& tensors,
                   const std::string& file = "tensors.bin");

struct MatrixPair {
  std::string name;
  Matrix w;
  Matrix w_prime;
};

/// Pairs tensors by name across two exported directories. A name present on
/// one side only is MissingPhase; differing shapes are ShapeMismatch.
std::vector<MatrixPair> load_pairs(const std::filesystem::path& pre_dir,
                                   const std::filesystem::path& post_dir);

/// `root/pre` and `root/post`.
std::vector<MatrixPair> load_manifest(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// SVD scaling versus rotation.

struct SVDReport {
  std::string name;
  std::size_t rank = 0;
  std::vector<double> sigma;        // top-rank singular values of W
  std::vector<double> sigma_prime;  // top-rank singular values of W'
  std::vector<double> scaling_ratios;
  std::vector<std::size_t> degenerate;  // indices dropped from scaling_ratios
  double left_alignment = 0.0;
  double right_alignment = 0.0;
  double recon_residual = 0.0;
};

inline constexpr std::size_t kDefaultSvdRank = 32;
inline constexpr double kDefaultSvdTol = 1e-6;

std::size_t default_rank(const Matrix& w) noexcept;

/// rank defaults to min(32, min(m, n)).
SVDReport svd_diff(const MatrixPair& pair, std::optional<std::size_t> rank = std::nullopt,
                   double tol = kDefaultSvdTol);

/// Mean squared cosine of the principal angles between span(A) and span(B);
/// both arguments must have orthonormal columns.
double subspace_alignment(const Matrix& a, const Matrix& b);

// ---------------------------------------------------------------------------
// Similarity measures.

double linear_cka(const Matrix& x, const Matrix& y);

inline constexpr double kDefaultKlEps = 1e-6;

/// KL(p || q) in nats. With eps > 0, zero entries become eps and each vector
/// is renormalized; eps = 0 disables smoothing (0 ln 0 = 0).
double kl_divergence(std::span<const double> p, std::span<const double> q,
                     double eps = kDefaultKlEps);

double kl_mean(const std::vector<std::vector<double>>& p_list,
               const std::vector<std::vector<double>>& q_list, double eps = kDefaultKlEps);

double l2_distance(const MatrixPair& pair);

/// sqrt(sum F_ij (W'_ij - W_ij)^2) with a non-negative diagonal Fisher F.
double fisher_distance(const MatrixPair& pair, const Matrix& fisher);

inline constexpr double kDefaultLogMinmaxEps = 1e-8;

std::vector<double> log_minmax(std::span<const double> series, double eps = kDefaultLogMinmaxEps);

}  // namespace ksmith
