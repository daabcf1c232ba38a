// Acceptance checks. Each criterion prints one PASS/FAIL line; exit code is
// nonzero when any selected criterion fails.
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "mvavg/mvavg.hpp"

using namespace mvavg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string describe_rates(const RateReport& rep) {
  std::string s;
  for (const auto& r : rep.rows) s += fmt(" eps=%g:%.4e", r.epsilon, r.error_sq);
  return s;
}

// Pinned tolerances.
constexpr double kW2Tol = 1e-12;
constexpr double kTriangleTol = 1e-10;
constexpr double kFbarMaxStdError = 0.02;
constexpr double kGapTol = 1e-8;
constexpr double kRateTol = 1e-6;
constexpr double kAveragedOdeFactor = 5.0;
constexpr double kSlopeThreshold = 0.6;
constexpr double kGapRatioSpread = 3.0;
constexpr double kProbeTol = 1e-10;
constexpr std::size_t kProbeSamples = 10000;

Outcome wasserstein_oracle() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  std::uniform_int_distribution<int> size(1, 6);
  auto draw = [&](int n) {
    std::vector<double> v(n);
    for (double& x : v) x = val(rng);
    return SampleSet::scalars(v);
  };
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = size(rng);
    const auto a = draw(n), b = draw(n);
    worst = std::max(worst, std::abs(w2_1d(a, b) - w2_bruteforce(a, b)));
  }
  double worst_tri = 0.0;
  for (int i = 0; i < 500; ++i) {
    const int n = size(rng);
    const auto a = draw(n), b = draw(n), c = draw(n);
    worst_tri = std::max(worst_tri, w2_1d(a, c) - w2_1d(a, b) - w2_1d(b, c));
  }
  return {worst <= kW2Tol && worst_tri <= kTriangleTol,
          fmt("max |sorted - bruteforce| = %.2e, max triangle excess = %.2e", worst, worst_tri)};
}

FrozenParams frozen_linear(double x, double horizon) {
  FrozenParams fp;
  fp.x = {x};
  fp.mu = MeasureView{{0.0}, 0.0, 1};
  fp.y_init = {0.0};
  fp.burn_in = 8.0;
  fp.sample_horizon = horizon;
  fp.micro_step = 0.01;
  return fp;
}

LinearBenchmarkParams frozen_oracle_params() {
  LinearBenchmarkParams p;
  p.gamma = 1.0;
  p.k1 = 1.0;
  p.k2 = 0.0;
  p.sigma2 = 0.5;
  p.f0 = 1.0;
  return p;
}

Outcome frozen_oracle() {
  const auto m = make_linear_benchmark(frozen_oracle_params());
  const auto est = estimate_fbar(m, frozen_linear(2.0, 200.0), NoisePlan(20240611));
  const double f = est.fbar[0], se = est.std_error[0];
  const bool within = std::abs(f - 2.0) <= 3.0 * se;
  return {within && se <= kFbarMaxStdError,
          fmt("fbar = %.5f (exact 2), std_error = %.4f (limit %.2f), within 3se: %s", f, se,
              kFbarMaxStdError, within ? "yes" : "no")};
}

Outcome contraction() {
  const auto m = make_linear_benchmark(frozen_oracle_params());
  auto fa = frozen_linear(2.0, 10.0);
  fa.burn_in = fa.micro_step;
  fa.y_init = {1.0};
  auto fb = fa;
  fb.y_init = {-1.0};
  const NoisePlan noise(7);
  const auto a = frozen_simulate(m, fa, noise);
  const auto b = frozen_simulate(m, fb, noise);
  double worst = 0.0;
  for (std::size_t k = 0; k < a.times.size(); ++k)
    worst = std::max(worst, std::abs(std::abs(a.states[k] - b.states[k]) - 2.0 * std::exp(-a.times[k])));
  const std::vector<double> y_alt{-1.0};
  const auto mix = estimate_mixing_rate(m, fa, y_alt, noise);
  return {worst <= kGapTol && std::abs(mix.rate - 2.0) <= kRateTol,
          fmt("max |gap - 2e^-t| = %.2e over %zu steps, rate = %.10f", worst, a.times.size(), mix.rate)};
}

Outcome averaged_oracle() {
  LinearBenchmarkParams lp;
  lp.sigma1 = 0.0;
  const auto m = make_linear_benchmark(lp);
  const double h = 0.01;
  const double rate = lp.a11 + lp.a12 + lp.f0 * (lp.k1 + lp.k2) / lp.gamma;
  const double exact = std::exp(rate);
  MultiscaleParams p;
  p.epsilon = 0.1;
  p.t_end = 1.0;
  p.h_micro = h;
  const std::vector<double> x0{1.0};
  const auto rec = simulate_averaged(m, x0, 1, p, NoisePlan(1));
  const double err = std::abs(rec.final_state.slow[0] - exact);
  return {err <= kAveragedOdeFactor * h,
          fmt("|X(1) - %.6f| = %.2e, limit %.2e", exact, err, kAveragedOdeFactor * h)};
}

Outcome rate_verdict(const StudyConfig& c, bool need_slope) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = run_rate_study(c);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = rep.complete && rep.strictly_decreasing && (!need_slope || rep.fit.slope >= kSlopeThreshold);
  std::string d = fmt("slope = %.3f, decreasing: %s, complete: %s, %.0f s;", rep.fit.slope,
                      rep.strictly_decreasing ? "yes" : "no", rep.complete ? "yes" : "no", secs);
  for (const auto& r : rep.rows)
    if (!r.ok) d += " failure: " + r.failure;
  return {pass, d + describe_rates(rep)};
}

StudyConfig linear_study() {
  StudyConfig c = default_config("linear-benchmark");
  c.particles = 1000;
  c.replications = 8;
  c.horizon = 1.0;
  c.epsilons = {0.1, 0.05, 0.02, 0.01, 0.005};
  return c;
}

StudyConfig cubic_study() {
  StudyConfig c = default_config("mvsde-cubic");
  c.particles = 200;
  c.replications = 4;
  c.epsilons = {0.1, 0.05, 0.02, 0.01};
  c.hmm.burn_in = 2.0;
  c.hmm.warm_burn_in = 0.5;
  c.hmm.horizon = 5.0;
  return c;
}

StudyConfig porous_study() {
  StudyConfig c = default_config("porous-media-1d");
  c.params = {{"r", 4.0}, {"n_interior", 63.0}, {"slow_modes", 4.0}, {"fast_modes", 4.0}};
  c.particles = 200;
  c.epsilons = {0.1, 0.05, 0.02};
  return c;
}

Outcome khasminskii() {
  StudyConfig c = default_config("linear-benchmark");
  c.particles = 1000;
  c.replications = 1;
  const auto t = run_aux_diagnostic(c, 0.05);
  std::string d = fmt("monotone: %s, ratio spread = %.2f (limit %.0f);", t.monotone ? "yes" : "no",
                      t.ratio_spread, kGapRatioSpread);
  for (const auto& r : t.rows) d += fmt(" delta=%.4f gap/delta=%.4f", r.delta, r.gap_over_delta);
  return {t.monotone && t.ratio_spread < kGapRatioSpread, d};
}

Outcome probes() {
  bool pass = true;
  std::string d;
  for (const auto& id : registered_models()) {
    const auto m = make_model(id);
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& rep : probe_suite(m, kProbeSamples, {}, 42, kProbeTol)) worst = std::min(worst, rep.worst_margin);
    pass = pass && worst >= -kProbeTol;
    d += fmt("%s worst=%.2e; ", id.c_str(), worst);
  }
  const auto bad = probe_hypothesis(make_anti_dissipative(), HypothesisProperty::strict_monotonicity_fast,
                                    kProbeSamples, {}, 42, kProbeTol);
  const bool rejected = bad.violating_witness.has_value();
  d += fmt("anti-dissipative rejected with witness: %s", rejected ? "yes" : "no");
  return {pass && rejected, d};
}

Outcome determinism() {
  StudyConfig c = linear_study();
  std::string bytes[2];
  const unsigned workers[2] = {1, 8};
  for (int i = 0; i < 2; ++i) {
    c.workers = workers[i];
    const auto dir = fs::path("acceptance_out") / ("workers_" + std::to_string(workers[i]));
    fs::remove_all(dir);
    write_report(run_rate_study(c), dir.string());
    std::ifstream in(dir / "rate_report.csv", std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    bytes[i] = s.str();
  }
  const bool same = !bytes[0].empty() && bytes[0] == bytes[1];
  return {same, fmt("rate_report.csv %s across 1 and 8 workers (%zu bytes)", same ? "identical" : "differs",
                    bytes[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1D Wasserstein sorted coupling matches brute force", wasserstein_oracle},
      {"frozen-equation average matches closed form", frozen_oracle},
      {"shared-noise frozen runs contract at rate 2", contraction},
      {"averaged equation matches closed-form ODE", averaged_oracle},
      {"linear benchmark rate study", [] { return rate_verdict(linear_study(), true); }},
      {"cubic mean-field rate study (multiscale estimator)", [] { return rate_verdict(cubic_study(), false); }},
      {"porous media rate study", [] { return rate_verdict(porous_study(), false); }},
      {"auxiliary-process gap scales with block size", khasminskii},
      {"hypothesis probes accept models and reject the broken one", probes},
      {"rate study is byte-identical across worker counts", determinism},
  };

  int failures = 0;
  for (int k : selected) {
    const auto& [name, run] = criteria[k - 1];
    Outcome o{false, ""};
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << k << ": " << name << " -- " << o.detail
              << std::endl;
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
