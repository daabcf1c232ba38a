#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <numbers>
#include <random>

#include "mvavg/spatial.hpp"

using namespace mvavg;

namespace {

// Dense reference matrix of the Dirichlet Laplacian.
Eigen::MatrixXd dense_laplacian(const Grid1D& g) {
  const auto n = static_cast<Eigen::Index>(g.n_interior());
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  const double s = 1.0 / (g.dx() * g.dx());
  for (Eigen::Index i = 0; i < n; ++i) {
    L(i, i) = -2.0 * s;
    if (i > 0) L(i, i - 1) = s;
    if (i + 1 < n) L(i, i + 1) = s;
  }
  return L;
}

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

Eigen::Map<const Eigen::VectorXd> as_eigen(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

TEST(Grid, SpacingCoversUnitInterval) {
  for (std::size_t n : {1u, 7u, 63u, 1000u}) {
    const Grid1D g(n);
    EXPECT_NEAR(g.dx() * static_cast<double>(n + 1), 1.0, 1e-12);
  }
  EXPECT_THROW(Grid1D(0), StructuralError);
}

TEST(Laplacian, SmallCases) {
  const Grid1D g(1);
  std::vector<double> out(1);
  laplacian_apply(g, std::vector<double>{1.0}, out);
  EXPECT_DOUBLE_EQ(out[0], -8.0);
  const Field zero(Grid1D(5));
  for (double v : laplacian_apply(LaplacianOp(zero.grid), zero).values) EXPECT_EQ(v, 0.0);
}

TEST(Laplacian, MatchesDenseMatrix) {
  std::mt19937_64 rng(1);
  const Grid1D g(17);
  const auto u = random_vec(rng, 17);
  std::vector<double> out(17);
  laplacian_apply(g, u, out);
  const Eigen::VectorXd ref = dense_laplacian(g) * as_eigen(u);
  for (std::size_t i = 0; i < 17; ++i) EXPECT_NEAR(out[i], ref(static_cast<Eigen::Index>(i)), 1e-9);
}

TEST(Laplacian, SineModeIsEigenvector) {
  const Grid1D g(40);
  const auto e = sine_mode(g, 1);
  std::vector<double> out(40);
  laplacian_apply(g, e, out);
  const double lam = dirichlet_eigenvalue(g, 1);
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(out[i], -lam * e[i], 1e-9);
  EXPECT_NEAR(lam, std::numbers::pi * std::numbers::pi, 0.01);
}

TEST(Laplacian, Symmetric) {
  std::mt19937_64 rng(2);
  const Grid1D g(30);
  const auto u = random_vec(rng, 30), v = random_vec(rng, 30);
  std::vector<double> lu(30), lv(30);
  laplacian_apply(g, u, lu);
  laplacian_apply(g, v, lv);
  EXPECT_NEAR(l2_inner(g, lu, v), l2_inner(g, u, lv), 1e-10);
}

TEST(Laplacian, DimensionMismatch) {
  std::vector<double> out(3);
  EXPECT_THROW(laplacian_apply(Grid1D(4), std::vector<double>(4), out), StructuralError);
  EXPECT_THROW(Field(Grid1D(4), std::vector<double>(3)), StructuralError);
}

TEST(Spectrum, Lambda1ClosedForm) {
  EXPECT_DOUBLE_EQ(lambda1(LaplacianOp(Grid1D(1))), 8.0);
  EXPECT_NEAR(lambda1(LaplacianOp(Grid1D(999))), std::numbers::pi * std::numbers::pi, 1e-3);
  double prev = 0.0;
  for (std::size_t n = 1; n < 200; ++n) {
    const double l = lambda1(LaplacianOp(Grid1D(n)));
    EXPECT_GT(l, prev);
    EXPECT_LT(l, std::numbers::pi * std::numbers::pi);
    prev = l;
  }
}

TEST(Spectrum, MatchesDenseEigensolver) {
  for (std::size_t n = 1; n <= 50; n += 7) {
    const Grid1D g(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-dense_laplacian(g));
    EXPECT_NEAR(es.eigenvalues()(0), lambda1(LaplacianOp(g)), 1e-9 * es.eigenvalues()(0));
    const double top = es.eigenvalues()(static_cast<Eigen::Index>(n) - 1);
    EXPECT_NEAR(top, lambda_max(LaplacianOp(g)), 1e-9 * top);
  }
}

TEST(Solver, ShiftedSystemMatchesDense) {
  std::mt19937_64 rng(3);
  const Grid1D g(25);
  const auto rhs = random_vec(rng, 25);
  for (auto [shift, scale] : {std::pair{0.0, 1.0}, {1.0, 0.3}, {-2.0, 1.0}, {1.0, 1e6}}) {
    std::vector<double> w(25);
    solve_shifted_laplacian(g, shift, scale, rhs, w);
    const Eigen::MatrixXd A = shift * Eigen::MatrixXd::Identity(25, 25) - scale * dense_laplacian(g);
    const Eigen::VectorXd ref = A.lu().solve(as_eigen(rhs));
    for (std::size_t i = 0; i < 25; ++i) {
      EXPECT_NEAR(w[i], ref(static_cast<Eigen::Index>(i)), 1e-10 * (1.0 + std::abs(ref(0))));
    }
  }
}

TEST(Norms, HminusOneSmallCases) {
  const Grid1D g(1);
  EXPECT_DOUBLE_EQ(hminus1_norm_sq(g, std::vector<double>{1.0}), 0.0625);
  EXPECT_EQ(hminus1_norm_sq(g, std::vector<double>{0.0}), 0.0);
  EXPECT_DOUBLE_EQ(hminus1_norm_sq(g, std::vector<double>{3.0}), 9.0 * 0.0625);
}

TEST(Norms, HminusOneMatchesDenseInverse) {
  std::mt19937_64 rng(4);
  const Grid1D g(20);
  const auto u = random_vec(rng, 20);
  const Eigen::MatrixXd inv = (-dense_laplacian(g)).inverse();
  const double ref = g.dx() * as_eigen(u).dot(inv * as_eigen(u));
  EXPECT_NEAR(hminus1_norm_sq(g, u), ref, 1e-12 * ref);
  EXPECT_GT(hminus1_norm_sq(g, u), 0.0);
}

TEST(Norms, TripleConsistency) {
  std::mt19937_64 rng(5);
  const Grid1D g(31);
  for (int t = 0; t < 20; ++t) {
    const auto u = random_vec(rng, 31), v = random_vec(rng, 31);
    std::vector<double> lu(31);
    laplacian_apply(g, u, lu);
    EXPECT_NEAR(-l2_inner(g, u, lu), h01_norm_sq(g, u), 1e-9 * h01_norm_sq(g, u));
    const double pair = l2_inner(g, u, v);
    EXPECT_LE(pair * pair, h01_norm_sq(g, u) * hminus1_norm_sq(g, v) * (1 + 1e-12));
    // ||(-L)u||_{H^-1}^2 = ||u||_{H^1_0}^2
    for (double& x : lu) x = -x;
    EXPECT_NEAR(hminus1_norm_sq(g, lu), h01_norm_sq(g, u), 1e-8 * h01_norm_sq(g, u));
  }
}

TEST(Norms, L2AndLr) {
  const Grid1D g(999);
  const std::vector<double> ones(999, 1.0);
  EXPECT_NEAR(l2_norm_sq(g, ones), 1.0, 2e-3);
  std::mt19937_64 rng(6);
  const auto u = random_vec(rng, 999);
  EXPECT_EQ(lr_norm(g, u, 2.0), std::sqrt(l2_norm_sq(g, u)));
  EXPECT_NEAR(lr_norm(g, ones, 4.0), std::pow(999.0 / 1000.0, 0.25), 1e-12);
  EXPECT_THROW(lr_norm(g, u, 0.5), StructuralError);
  EXPECT_EQ(h01_norm_sq(g, std::vector<double>(999, 0.0)), 0.0);
}

TEST(Modes, OrthonormalUnderGridInnerProduct) {
  const Grid1D g(15);
  for (std::size_t j = 1; j <= 15; ++j) {
    for (std::size_t k = 1; k <= 15; ++k) {
      EXPECT_NEAR(l2_inner(g, sine_mode(g, j), sine_mode(g, k)), j == k ? 1.0 : 0.0, 1e-12);
    }
  }
}

TEST(Modes, ProjectionExamples) {
  const Grid1D g(21);
  std::mt19937_64 rng(7);
  const Field u(g, random_vec(rng, 21));
  const auto full = mode_project(u, 21);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_NEAR(full.values[i], u.values[i], 1e-10);

  const Field e1(g, sine_mode(g, 1));
  const auto p1 = mode_project(e1, 1);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_NEAR(p1.values[i], e1.values[i], 1e-12);

  auto e3 = sine_mode(g, 3);
  std::vector<double> sum(21);
  for (std::size_t i = 0; i < 21; ++i) sum[i] = e1.values[i] + e3[i];
  const auto p2 = mode_project(Field(g, sum), 2);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_NEAR(p2.values[i], e1.values[i], 1e-12);

  const auto p5 = mode_project(u, 5);
  const auto p55 = mode_project(p5, 5);
  for (std::size_t i = 0; i < 21; ++i) EXPECT_NEAR(p55.values[i], p5.values[i], 1e-12);
  EXPECT_LE(l2_norm_sq(g, p5), l2_norm_sq(g, u) + 1e-12);

  EXPECT_THROW(mode_project(u, 0), StructuralError);
  EXPECT_THROW(mode_project(u, 22), StructuralError);
}

TEST(StateNormTags, DispatchToGridNorms) {
  const Grid1D g(9);
  std::mt19937_64 rng(8);
  const auto u = random_vec(rng, 9);
  EXPECT_EQ(StateNorm::on_grid(NormTag::grid_l2, g)(u), l2_norm_sq(g, u));
  EXPECT_EQ(StateNorm::on_grid(NormTag::grid_hminus1, g)(u), hminus1_norm_sq(g, u));
  EXPECT_EQ(StateNorm::on_grid(NormTag::grid_h01, g)(u), h01_norm_sq(g, u));
  EXPECT_THROW(StateNorm::on_grid(NormTag::grid_h01, g).inner(u, u), UnsupportedCase);
  EXPECT_EQ(to_string(NormTag::grid_hminus1), "hminus1");
}
