#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "mvavg/models.hpp"
#include "mvavg/probe.hpp"

using namespace mvavg;

namespace {

std::vector<double> random_vec(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

MeasureView view_with_mean(double m) { return MeasureView{{m}, m * m, 1}; }

double eval_slow(const ModelSpec::SlowFn& fn, std::vector<double> u, const MeasureView& mu) {
  std::vector<double> out(u.size());
  fn(u, mu, out);
  return out[0];
}

}  // namespace

TEST(LinearBenchmark, ClosedFormAveragedCoupling) {
  LinearBenchmarkParams p;
  p.gamma = 1;
  p.k1 = 1;
  p.k2 = 0;
  p.f0 = 1;
  const auto m = make_linear_benchmark(p);
  EXPECT_DOUBLE_EQ(eval_slow(*m.fbar_exact, {2.0}, view_with_mean(7.0)), 2.0);
  EXPECT_EQ(eval_slow(*m.fbar_exact, {0.0}, view_with_mean(3.0)), 0.0);
  EXPECT_EQ(m.constants.kappa, p.gamma);
  EXPECT_EQ(m.constants.l_b2, 0.0);
  EXPECT_TRUE(m.claims_rate_bound());
}

TEST(LinearBenchmark, RejectsNonDissipative) {
  LinearBenchmarkParams p;
  p.gamma = 0.0;
  EXPECT_THROW(make_linear_benchmark(p), StructuralError);
  p.gamma = -1.0;
  EXPECT_THROW(make_linear_benchmark(p), StructuralError);
  EXPECT_THROW(make_model("linear-benchmark", {{"gamma", -2.0}}), StructuralError);
}

TEST(LinearBenchmark, FastDriftHasDeclaredForm) {
  const auto m = make_linear_benchmark({});
  std::vector<double> out(1);
  const MeasureView mu = view_with_mean(0.4);
  m.a2(std::vector<double>{1.5}, mu, std::vector<double>{-0.3}, out);
  EXPECT_DOUBLE_EQ(out[0], -1.0 * -0.3 + 1.0 * 1.5 + 0.5 * 0.4);
}

TEST(LinearBenchmark, AveragedCouplingLipschitz) {
  LinearBenchmarkParams p;
  p.f0 = 1.3;
  p.k1 = 0.7;
  p.k2 = -1.1;
  p.gamma = 2.0;
  const auto m = make_linear_benchmark(p);
  const double lip = std::abs(p.f0) * std::max(std::abs(p.k1), std::abs(p.k2)) / p.gamma;
  std::mt19937_64 rng(21);
  for (int t = 0; t < 500; ++t) {
    const auto s = random_vec(rng, 4, 3.0);
    const double d = std::abs(eval_slow(*m.fbar_exact, {s[0]}, view_with_mean(s[1])) -
                              eval_slow(*m.fbar_exact, {s[2]}, view_with_mean(s[3])));
    EXPECT_LE(d, lip * (std::abs(s[0] - s[2]) + std::abs(s[1] - s[3])) + 1e-12);
  }
}

TEST(MvsdeCubic, DeclaredConstants) {
  const auto m = make_mvsde_cubic({});
  EXPECT_EQ(m.constants.l_b2, 0.2);
  EXPECT_TRUE(m.claims_rate_bound());
  MvsdeCubicParams p;
  p.l_sigma2 = 0.0;
  EXPECT_TRUE(make_mvsde_cubic(p).claims_rate_bound());
  p.l_sigma2 = 0.9;
  EXPECT_FALSE(make_mvsde_cubic(p).claims_rate_bound());
  p.kappa = 0.0;
  EXPECT_THROW(make_mvsde_cubic(p), StructuralError);
}

TEST(MvsdeCubic, FastDriftMonotone) {
  const auto m = make_mvsde_cubic({});
  std::mt19937_64 rng(22);
  const MeasureView mu = view_with_mean(0.3);
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_vec(rng, 3, 2.0);
    std::vector<double> a(1), b(1);
    m.a2(std::vector<double>{s[0]}, mu, std::vector<double>{s[1]}, a);
    m.a2(std::vector<double>{s[0]}, mu, std::vector<double>{s[2]}, b);
    const double dy = s[1] - s[2];
    EXPECT_LE((a[0] - b[0]) * dy, -m.constants.kappa * dy * dy + 1e-12);
  }
}

TEST(PorousMedia, NonlinearityMonotoneAndZeroFixed) {
  const auto m = make_porous_media_1d({});
  const Grid1D g = *m.grid;
  std::vector<double> out(g.n_interior(), 1.0);
  m.a1(std::vector<double>(g.n_interior(), 0.0), MeasureView{}, out);
  for (double v : out) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(23);
  for (int t = 0; t < 1000; ++t) {
    const auto s = random_vec(rng, 2, 3.0);
    EXPECT_GE((detail::signed_power(s[0], 4) - detail::signed_power(s[1], 4)) * (s[0] - s[1]), 0.0);
  }
  EXPECT_THROW(make_porous_media_1d(PorousMediaParams{1.5, {}}), StructuralError);
}

TEST(PorousMedia, CoercivityPairingIsEquality) {
  const auto m = make_porous_media_1d({});
  const Grid1D g = *m.grid;
  std::mt19937_64 rng(24);
  for (int t = 0; t < 20; ++t) {
    const auto u = random_vec(rng, g.n_interior());
    std::vector<double> a1u(u.size());
    m.a1(u, MeasureView{}, a1u);
    const double pairing = -m.slow_norm.inner(a1u, u);
    double ref = 0.0;
    for (double x : u) ref += std::pow(std::abs(x), 4.0);
    ref *= g.dx();
    EXPECT_NEAR(pairing, ref, 1e-9 * ref);
    EXPECT_NEAR(m.slow_v_norm_pow(u), ref, 1e-12 * ref);
  }
}

TEST(PorousMedia, AveragedCouplingMatchesDenseSolve) {
  FieldCouplingParams fp;
  fp.n_interior = 15;
  const auto m = make_porous_media_1d(PorousMediaParams{4.0, fp});
  const Grid1D g = *m.grid;
  const auto n = static_cast<Eigen::Index>(g.n_interior());
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  const double s = 1.0 / (g.dx() * g.dx());
  for (Eigen::Index i = 0; i < n; ++i) {
    A(i, i) = 2.0 * s - fp.g_v;
    if (i > 0) A(i, i - 1) = -s;
    if (i + 1 < n) A(i, i + 1) = -s;
  }
  std::mt19937_64 rng(25);
  const auto u = random_vec(rng, g.n_interior());
  MeasureView mu{random_vec(rng, g.n_interior()), 0.7, 10};
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    rhs(i) = fp.c_g * std::tanh(u[i]) + fp.c_gm * mu.mean[i];
  }
  const Eigen::VectorXd vbar = A.lu().solve(rhs);
  std::vector<double> out(u.size());
  (*m.fbar_exact)(u, mu, out);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ref = fp.c_f * vbar(i) + fp.c_m * std::tanh(0.7) * std::tanh(u[i]);
    EXPECT_NEAR(out[i], ref, 1e-10);
  }
}

TEST(PLaplace, ReducesToLaplacianAtTwo) {
  const auto m = make_plaplace_1d(PLaplaceParams{2.0, {}});
  const Grid1D g = *m.grid;
  std::mt19937_64 rng(26);
  for (int t = 0; t < 10; ++t) {
    const auto u = random_vec(rng, g.n_interior());
    std::vector<double> a(u.size()), ref(u.size());
    m.a1(u, MeasureView{}, a);
    laplacian_apply(g, u, ref);
    double scale = 0.0;
    for (double r : ref) scale = std::max(scale, std::abs(r));
    for (std::size_t i = 0; i < u.size(); ++i) EXPECT_NEAR(a[i], ref[i], 1e-12 * scale);
  }
}

TEST(PLaplace, MonotoneAndZeroFixed) {
  const auto m = make_plaplace_1d({});
  const Grid1D g = *m.grid;
  std::vector<double> z(g.n_interior(), 0.0), out(g.n_interior(), 1.0);
  m.a1(z, MeasureView{}, out);
  for (double v : out) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(27);
  for (int t = 0; t < 200; ++t) {
    const auto u = random_vec(rng, g.n_interior());
    const auto v = random_vec(rng, g.n_interior());
    std::vector<double> au(u.size()), av(u.size()), d(u.size());
    m.a1(u, MeasureView{}, au);
    m.a1(v, MeasureView{}, av);
    for (std::size_t i = 0; i < u.size(); ++i) {
      au[i] -= av[i];
      d[i] = u[i] - v[i];
    }
    EXPECT_LE(l2_inner(g, au, d), 1e-9);
  }
  EXPECT_THROW(make_plaplace_1d(PLaplaceParams{1.0, {}}), StructuralError);
}

TEST(FieldModels, SpectralGapClaim) {
  EXPECT_TRUE(make_porous_media_1d({}).claims_rate_bound());
  FieldCouplingParams fp;
  fp.g_v = 20.0;
  EXPECT_THROW(make_plaplace_1d(PLaplaceParams{3.0, fp}), StructuralError);
  fp.g_v = 1.0;
  fp.slow_modes = 100;
  EXPECT_THROW(make_porous_media_1d(PorousMediaParams{4.0, fp}), StructuralError);
}

TEST(Registry, KnownIdsAndErrors) {
  for (const auto& id : registered_models()) EXPECT_EQ(make_model(id).id, id);
  try {
    make_model("heat-equation");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "model");
  }
  try {
    make_model("linear-benchmark", {{"gama", 1.0}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "params.gama");
  }
  EXPECT_THROW(make_model("porous-media-1d", {{"n_interior", 2.5}}), ConfigError);
  EXPECT_EQ(make_model("porous-media-1d", {{"n_interior", 31}}).slow_dim, 31u);
}

TEST(Registry, PropertyNames) {
  for (auto p : all_properties()) EXPECT_EQ(property_from_string(to_string(p)), p);
  EXPECT_THROW(property_from_string("lipschitz_q"), StructuralError);
}

TEST(Probes, LinearFastMonotonicityIsEqualityCase) {
  const auto rep = probe_hypothesis(make_linear_benchmark({}), HypothesisProperty::strict_monotonicity_fast,
                                    2000, {}, 5);
  EXPECT_EQ(rep.samples, 2000u);
  EXPECT_GE(rep.worst_margin, -1e-12);
  EXPECT_LE(rep.worst_margin, 1e-12);
  EXPECT_FALSE(rep.violating_witness);
}

TEST(Probes, AntiDissipativeModelCaught) {
  const auto rep = probe_hypothesis(make_anti_dissipative(), HypothesisProperty::strict_monotonicity_fast,
                                    100, {}, 6);
  EXPECT_LT(rep.worst_margin, -1e-10);
  ASSERT_TRUE(rep.violating_witness);
  EXPECT_EQ(rep.violating_witness->margin, rep.worst_margin);
}

TEST(Probes, PorousSlowMonotonicity) {
  const auto rep = probe_hypothesis(make_porous_media_1d({}), HypothesisProperty::monotonicity_slow,
                                    10000, {}, 7);
  EXPECT_GE(rep.worst_margin, -1e-10);
}

TEST(Probes, Deterministic) {
  const auto m = make_mvsde_cubic({});
  const auto a = probe_hypothesis(m, HypothesisProperty::coercivity_fast, 500, {}, 8);
  const auto b = probe_hypothesis(m, HypothesisProperty::coercivity_fast, 500, {}, 8);
  EXPECT_EQ(a.worst_margin, b.worst_margin);
}

TEST(Probes, EveryRegisteredModelPassesItsSuite) {
  for (const auto& id : registered_models()) {
    const auto m = make_model(id);
    for (const auto& rep : probe_suite(m, 1000, {}, 9)) {
      EXPECT_GE(rep.worst_margin, -1e-10) << id << " " << to_string(rep.property);
      EXPECT_FALSE(rep.violating_witness);
    }
  }
}
