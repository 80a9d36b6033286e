#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ksmith/geometry.hpp"
#include "support.hpp"

using namespace ksmith;
using test::code_of;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<double>(rng.next() >> 11) * 0x1p-52 - 1.0;
  return m;
}

Matrix random_orthogonal(Rng& rng, Eigen::Index n) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(rng, n, n));
  return qr.householderQ() * Matrix::Identity(n, n);
}

// tr(K H L H) / (n-1)^2 over Gram matrices, by explicit loops.
double hsic(const Matrix& x, const Matrix& y) {
  const auto n = x.rows();
  Matrix k = x * x.transpose(), l = y * y.transpose();
  Matrix h = Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Matrix kh(n, n), lh(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      double a = 0.0, b = 0.0;
      for (Eigen::Index t = 0; t < n; ++t) {
        a += k(i, t) * h(t, j);
        b += l(i, t) * h(t, j);
      }
      kh(i, j) = a;
      lh(i, j) = b;
    }
  double tr = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index t = 0; t < n; ++t) tr += kh(i, t) * lh(t, i);
  return tr / static_cast<double>((n - 1) * (n - 1));
}

double cka_oracle(const Matrix& x, const Matrix& y) { return hsic(x, y) / std::sqrt(hsic(x, x) * hsic(y, y)); }

}  // namespace

TEST(SvdDiff, DoublingIsPureScaling) {
  Rng rng(1);
  Matrix w = random_matrix(rng, 5, 3);
  auto rep = svd_diff({"w", w, 2.0 * w});
  EXPECT_EQ(rep.rank, 3u);
  ASSERT_EQ(rep.scaling_ratios.size(), 3u);
  for (double r : rep.scaling_ratios) EXPECT_NEAR(r, 2.0, 1e-12);
  EXPECT_NEAR(rep.left_alignment, 1.0, 1e-12);
  EXPECT_NEAR(rep.right_alignment, 1.0, 1e-12);
  EXPECT_LT(rep.recon_residual, 1e-12);
}

TEST(SvdDiff, IdentityChangeHasUnitRatios) {
  Rng rng(2);
  Matrix w = random_matrix(rng, 4, 4);
  auto rep = svd_diff({"w", w, w});
  for (double r : rep.scaling_ratios) EXPECT_NEAR(r, 1.0, 1e-12);
  EXPECT_TRUE(rep.degenerate.empty());
}

TEST(SvdDiff, SingularValuesRecomposeTheMatrix) {
  Rng rng(3);
  Matrix w = random_matrix(rng, 6, 4);
  Matrix wp = random_matrix(rng, 6, 4);
  auto rep = svd_diff({"w", w, wp}, 4);
  // Frobenius norm squared equals the sum of squared singular values.
  double s = 0.0, sp = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    s += rep.sigma[i] * rep.sigma[i];
    sp += rep.sigma_prime[i] * rep.sigma_prime[i];
  }
  EXPECT_NEAR(s, w.squaredNorm(), 1e-10);
  EXPECT_NEAR(sp, wp.squaredNorm(), 1e-10);
  for (std::size_t i = 0; i + 1 < 4; ++i) EXPECT_GE(rep.sigma[i], rep.sigma[i + 1]);
  EXPECT_LT(rep.right_alignment, 1.0 + 1e-12);
}

TEST(SvdDiff, RankAndDegenerateHandling) {
  Matrix w = Matrix::Zero(3, 3);
  w(0, 0) = 1.0;
  w(1, 1) = 0.5;
  auto rep = svd_diff({"w", w, w}, 3);
  EXPECT_EQ(rep.degenerate, (std::vector<std::size_t>{2}));
  EXPECT_EQ(rep.scaling_ratios.size(), 2u);
  EXPECT_EQ(code_of([&] { svd_diff({"w", w, w}, 4); }), Errc::InvalidArgument);
  EXPECT_EQ(code_of([&] { svd_diff({"w", Matrix::Zero(2, 2), w.topLeftCorner(2, 2)}); }), Errc::DegenerateInput);
  EXPECT_EQ(code_of([&] { svd_diff({"w", w, Matrix::Ones(3, 2)}); }), Errc::ShapeMismatch);
  Matrix big = Matrix::Identity(40, 40);
  EXPECT_EQ(default_rank(big), 32u);
}

TEST(Cka, SelfSimilarityIsOne) {
  Rng rng(4);
  Matrix x = random_matrix(rng, 10, 4);
  EXPECT_NEAR(linear_cka(x, x), 1.0, 1e-12);
}

TEST(Cka, InvariantToOrthogonalTransformAndIsotropicScale) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    Matrix x = random_matrix(rng, 12, 5);
    Matrix y = random_matrix(rng, 12, 3);
    const double base = linear_cka(x, y);
    Matrix q = random_orthogonal(rng, 5);
    EXPECT_NEAR(linear_cka(x * q, y), base, 1e-9);
    EXPECT_NEAR(linear_cka(3.5 * x, y), base, 1e-12);
    EXPECT_NEAR(linear_cka(y, x), base, 1e-12);
  }
}

TEST(Cka, MatchesHsicOracle) {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    Matrix x = random_matrix(rng, 8, 3);
    Matrix y = random_matrix(rng, 8, 5);
    EXPECT_NEAR(linear_cka(x, y), cka_oracle(x, y), 1e-9);
  }
}

TEST(Cka, Rejections) {
  EXPECT_EQ(code_of([] { linear_cka(Matrix::Ones(3, 2), Matrix::Ones(4, 2)); }), Errc::ShapeMismatch);
  EXPECT_EQ(code_of([] { linear_cka(Matrix::Ones(3, 2), Matrix::Identity(3, 2)); }), Errc::DegenerateInput);
}

TEST(Kl, HandComputedValues) {
  std::vector<double> p{1.0, 0.0, 0.0, 0.0}, q{0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(kl_divergence(p, q, 0.0), std::log(4.0), 1e-12);
  EXPECT_EQ(kl_divergence(q, q), 0.0);
  EXPECT_TRUE(std::isinf(kl_divergence(q, p, 0.0)));
  EXPECT_TRUE(std::isfinite(kl_divergence(q, p)));
  EXPECT_NEAR(kl_mean({p, q}, {q, q}, 0.0), std::log(4.0) / 2.0, 1e-12);
}

TEST(Kl, Rejections) {
  std::vector<double> p{0.5, 0.5}, bad{0.5, 0.6}, neg{1.5, -0.5}, three{0.2, 0.3, 0.5};
  EXPECT_EQ(code_of([&] { kl_divergence(p, bad); }), Errc::InvalidDistribution);
  EXPECT_EQ(code_of([&] { kl_divergence(p, neg); }), Errc::InvalidDistribution);
  EXPECT_EQ(code_of([&] { kl_divergence(p, three); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([&] { kl_mean({p}, {}); }), Errc::LengthMismatch);
}

TEST(Distances, LoopOracles) {
  Rng rng(7);
  Matrix w = random_matrix(rng, 4, 6), wp = random_matrix(rng, 4, 6);
  Matrix f = random_matrix(rng, 4, 6).cwiseAbs();
  double l2 = 0.0, fi = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < 6; ++j) {
      const double d = wp(i, j) - w(i, j);
      l2 += d * d;
      fi += f(i, j) * d * d;
    }
  MatrixPair pair{"w", w, wp};
  EXPECT_NEAR(l2_distance(pair), std::sqrt(l2), 1e-12);
  EXPECT_NEAR(fisher_distance(pair, f), std::sqrt(fi), 1e-12);
  EXPECT_NEAR(fisher_distance(pair, Matrix::Ones(4, 6)), l2_distance(pair), 1e-12);
  EXPECT_EQ(fisher_distance(pair, Matrix::Zero(4, 6)), 0.0);
  Matrix negative = f;
  negative(0, 0) = -1.0;
  EXPECT_EQ(code_of([&] { fisher_distance(pair, negative); }), Errc::NegativeWeight);
}

TEST(Distances, IdentityShiftHasNormRootThree) {
  Rng rng(8);
  Matrix w = random_matrix(rng, 3, 3);
  EXPECT_NEAR(l2_distance({"w", w, w + Matrix::Identity(3, 3)}), std::sqrt(3.0), 1e-12);
}

TEST(LogMinmax, Cases) {
  std::vector<double> decades{1.0, 10.0, 100.0};
  auto out = log_minmax(decades, 1e-12);
  EXPECT_NEAR(out[0], 0.0, 1e-12);
  EXPECT_NEAR(out[1], 0.5, 1e-12);
  EXPECT_NEAR(out[2], 1.0, 1e-12);

  std::vector<double> odd{0.3, 7.0, 0.9};
  auto o = log_minmax(odd);
  const double lo = std::log10(0.3 + 1e-8), hi = std::log10(7.0 + 1e-8), mid = std::log10(0.9 + 1e-8);
  EXPECT_NEAR(o[0], 0.0, 1e-12);
  EXPECT_NEAR(o[1], 1.0, 1e-12);
  EXPECT_NEAR(o[2], (mid - lo) / (hi - lo), 1e-12);

  std::vector<double> flat{5.0, 5.0, 5.0}, single{1.0}, neg{1.0, -1.0};
  EXPECT_EQ(code_of([&] { log_minmax(flat); }), Errc::ConstantSeries);
  EXPECT_EQ(code_of([&] { log_minmax(single); }), Errc::ShortSeries);
  EXPECT_EQ(code_of([&] { log_minmax(neg); }), Errc::OutOfRange);
}

TEST(Tensors, WriteReadIsBitExact) {
  test::TempDir dir;
  Rng rng(9);
  std::map<std::string, Matrix> m{{"layer0", random_matrix(rng, 4, 4)}, {"layer1", random_matrix(rng, 2, 7)}};
  for (auto& [_, v] : m) v = v.cast<float>().cast<double>();
  write_tensors(dir.path(), m);
  auto back = load_tensors(dir.path());
  ASSERT_EQ(back.size(), 2u);
  for (const auto& [name, v] : m) EXPECT_EQ(back.at(name), v) << name;
  auto entries = read_manifest(dir.path());
  EXPECT_EQ(entries[0].dtype, "f32");
}

TEST(Tensors, PairsAcrossPhases) {
  test::TempDir dir;
  Matrix w = Matrix::Identity(4, 4);
  write_tensors(dir / "pre", {{"layer0", w}});
  write_tensors(dir / "post", {{"layer0", 2.0 * w}});
  auto pairs = load_manifest(dir.path());
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(pairs[0].name, "layer0");
  EXPECT_EQ(pairs[0].w_prime, 2.0 * w);
}

TEST(Tensors, MissingPostLayerIsMissingPhase) {
  test::TempDir dir;
  write_tensors(dir / "pre", {{"layer0", Matrix::Identity(4, 4)}, {"layer1", Matrix::Identity(2, 2)}});
  write_tensors(dir / "post", {{"layer0", Matrix::Identity(4, 4)}});
  EXPECT_EQ(code_of([&] { load_manifest(dir.path()); }), Errc::MissingPhase);
  EXPECT_EQ(code_of([&] { read_manifest(dir / "absent"); }), Errc::MissingPhase);
}

TEST(Tensors, ShortPayloadIsShapeMismatch) {
  test::TempDir dir;
  nlohmann::json manifest{{"entries",
                           {{{"name", "layer0"}, {"rows", 4}, {"cols", 4}, {"dtype", "f32"},
                             {"file", "tensors.bin"}, {"byte_offset", 0}}}}};
  test::spit(dir / "manifest.json", manifest.dump());
  std::string payload(12 * sizeof(float), '\0');
  test::spit(dir / "tensors.bin", payload);
  EXPECT_EQ(code_of([&] { load_tensors(dir.path()); }), Errc::ShapeMismatch);
}

TEST(Tensors, CheckedInFixtures) {
  auto copy = load_pairs(test::fixture("tensors/pre"), test::fixture("tensors/post_copy"));
  ASSERT_EQ(copy.size(), 3u);
  for (const auto& p : copy) {
    EXPECT_EQ(l2_distance(p), 0.0);
    EXPECT_NEAR(linear_cka(p.w, p.w_prime), 1.0, 1e-12);
  }
  auto doubled = load_pairs(test::fixture("tensors/pre"), test::fixture("tensors/post_x2"));
  for (const auto& p : doubled)
    for (double r : svd_diff(p).scaling_ratios) EXPECT_NEAR(r, 2.0, 1e-9) << p.name;
  EXPECT_EQ(code_of([] { load_pairs(test::fixture("tensors/pre"), test::fixture("tensors/post_renamed")); }),
            Errc::MissingPhase);
  auto fisher = load_tensors(test::fixture("tensors/fisher"));
  for (const auto& p : doubled) EXPECT_GT(fisher_distance(p, fisher.at(p.name)), 0.0);
}
