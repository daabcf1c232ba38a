#pragma once

// Randomized slack probes of the structural inequalities a model declares.
// Each sample draws (u1, u2, mu1, mu2, v1, v2) and evaluates
// slack = right-hand side - left-hand side; slack >= 0 means satisfied.
//
// The fast monotonicity and B2-Lipschitz properties are checked in frozen
// form (same u and mu on both sides), which is the form the fast-process
// contraction actually uses.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mvavg/measure.hpp"
#include "mvavg/model.hpp"
#include "mvavg/rng.hpp"

namespace mvavg {

struct SamplerConfig {
  double state_scale = 1.0;          // std of slow and fast states
  std::size_t measure_points = 6;    // particles per sampled measure
  double measure_scale = 1.0;        // std of measure particles around a random center
};

struct ProbeWitness {
  std::vector<double> u1, u2, v1, v2;
  MeasureView mu1, mu2;
  double w2_lower = 0.0;
  double margin = 0.0;
};

struct HypothesisReport {
  HypothesisProperty property;
  std::size_t samples = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::optional<ProbeWitness> violating_witness;
};

namespace detail {

class ProbeDraws {
 public:
  explicit ProbeDraws(std::uint64_t seed) : plan_(seed) {}
  double normal() { return plan_.gaussian({NoiseComponent::spread, 0, 0, 0x9B0BEull}, next_++); }
  void fill(std::vector<double>& x, std::size_t n, double scale) {
    x.resize(n);
    for (double& e : x) e = scale * normal();
  }

 private:
  NoisePlan plan_;
  std::uint64_t next_ = 0;
};

/// Lower bound on W2 between two clouds: exact in 1D, moment-based otherwise.
inline double w2_lower_bound(const std::vector<double>& a, const std::vector<double>& b,
                             std::size_t dim, const MeasureView& ma, const MeasureView& mb,
                             const StateNorm& norm) {
  if (dim == 1 && a.size() == b.size()) {
    return w2_1d(SampleSet::scalars(a), SampleSet::scalars(b));
  }
  std::vector<double> dm(dim);
  for (std::size_t k = 0; k < dim; ++k) dm[k] = ma.mean[k] - mb.mean[k];
  const double mean_gap = std::sqrt(norm.squared(dm));
  const double rad_gap = std::abs(std::sqrt(ma.second_moment) - std::sqrt(mb.second_moment));
  return std::max(mean_gap, rad_gap);
}

inline std::vector<double> diff(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

/// Hilbert-Schmidt norm squared of a column-major matrix, columns measured by `norm`.
inline double hs_norm_sq(const std::vector<double>& mat, std::size_t rows, const StateNorm& norm) {
  double s = 0.0;
  for (std::size_t c = 0; c * rows < mat.size(); ++c) {
    s += norm.squared(std::span<const double>(mat.data() + c * rows, rows));
  }
  return s;
}

}  // namespace detail

inline HypothesisReport probe_hypothesis(const ModelSpec& m, HypothesisProperty property,
                                         std::size_t n_samples, const SamplerConfig& sc,
                                         std::uint64_t seed, double tolerance = 1e-10) {
  using detail::diff;
  const std::size_t ds = m.slow_dim, df = m.fast_dim;
  const auto& k = m.constants;
  const auto& sn = m.slow_norm;
  const auto& fn = m.fast_norm;
  detail::ProbeDraws draw(seed ^ (static_cast<std::uint64_t>(property) << 40));

  HypothesisReport rep{property, n_samples, std::numeric_limits<double>::infinity(), std::nullopt};
  std::vector<double> u1, u2, v1, v2, cloud1, cloud2;
  std::vector<double> o1(std::max(ds, df)), o2(std::max(ds, df));
  std::vector<double> bm1, bm2;

  auto sample_cloud = [&](std::vector<double>& cloud) {
    std::vector<double> center;
    draw.fill(center, ds, sc.state_scale);
    cloud.resize(sc.measure_points * ds);
    for (std::size_t i = 0; i < sc.measure_points; ++i) {
      for (std::size_t c = 0; c < ds; ++c) cloud[i * ds + c] = center[c] + sc.measure_scale * draw.normal();
    }
  };

  for (std::size_t s = 0; s < n_samples; ++s) {
    draw.fill(u1, ds, sc.state_scale);
    draw.fill(u2, ds, sc.state_scale);
    draw.fill(v1, df, sc.state_scale);
    draw.fill(v2, df, sc.state_scale);
    sample_cloud(cloud1);
    sample_cloud(cloud2);
    const MeasureView mu1 = measure_view(cloud1, sc.measure_points, ds, sn);
    const MeasureView mu2 = measure_view(cloud2, sc.measure_points, ds, sn);
    const double w = detail::w2_lower_bound(cloud1, cloud2, ds, mu1, mu2, sn);
    const auto du = diff(u1, u2);
    const auto dv = diff(v1, v2);
    const double du_n = std::sqrt(sn.squared(du));
    const double dv_n = std::sqrt(fn.squared(dv));

    std::span<double> s1(o1.data(), ds), s2(o2.data(), ds);
    std::span<double> f1(o1.data(), df), f2(o2.data(), df);
    double slack = 0.0;
    switch (property) {
      case HypothesisProperty::monotonicity_slow: {
        m.a1(u1, mu1, s1);
        m.a1(u2, mu2, s2);
        const auto da = diff(o1, o2);
        bm1.resize(ds * m.slow_noise_dim);
        bm2.resize(ds * m.slow_noise_dim);
        m.b1(u1, mu1, bm1);
        m.b1(u2, mu2, bm2);
        const double lhs = 2.0 * sn.inner(std::span(da).first(ds), du) +
                           detail::hs_norm_sq(diff(bm1, bm2), ds, sn);
        slack = k.c1 * (du_n * du_n + w * w) - lhs;
        break;
      }
      case HypothesisProperty::strict_monotonicity_fast: {
        m.a2(u1, mu1, v1, f1);
        m.a2(u1, mu1, v2, f2);
        const auto da = diff(o1, o2);
        slack = -k.kappa * dv_n * dv_n - fn.inner(std::span(da).first(df), dv);
        break;
      }
      case HypothesisProperty::lipschitz_f: {
        m.f(u1, mu1, v1, s1);
        m.f(u2, mu2, v2, s2);
        const auto d = diff(o1, o2);
        slack = k.c1 * (du_n + dv_n + w) - std::sqrt(sn.squared(std::span(d).first(ds)));
        break;
      }
      case HypothesisProperty::lipschitz_b1: {
        bm1.resize(ds * m.slow_noise_dim);
        bm2.resize(ds * m.slow_noise_dim);
        m.b1(u1, mu1, bm1);
        m.b1(u2, mu2, bm2);
        slack = k.c1 * (du_n + w) - std::sqrt(detail::hs_norm_sq(diff(bm1, bm2), ds, sn));
        break;
      }
      case HypothesisProperty::lipschitz_b2: {
        bm1.resize(df * m.fast_noise_dim);
        bm2.resize(df * m.fast_noise_dim);
        m.b2(u1, mu1, v1, bm1);
        m.b2(u1, mu1, v2, bm2);
        slack = k.l_b2 * dv_n - std::sqrt(detail::hs_norm_sq(diff(bm1, bm2), df, fn));
        break;
      }
      case HypothesisProperty::coercivity_slow: {
        m.a1(u1, mu1, s1);
        bm1.resize(ds * m.slow_noise_dim);
        m.b1(u1, mu1, bm1);
        const double lhs = 2.0 * sn.inner(s1, u1) + detail::hs_norm_sq(bm1, ds, sn);
        const double rhs = -k.theta * m.slow_v_norm_pow(u1) +
                           k.c1 * (1.0 + sn.squared(u1) + mu1.second_moment);
        slack = rhs - lhs;
        break;
      }
      case HypothesisProperty::coercivity_fast: {
        m.a2(u1, mu1, v1, f1);
        bm1.resize(df * m.fast_noise_dim);
        m.b2(u1, mu1, v1, bm1);
        const double lhs = 2.0 * fn.inner(f1, v1) + detail::hs_norm_sq(bm1, df, fn);
        const double rhs = -k.eta * m.fast_v_norm_pow(v1) +
                           k.c2 * (1.0 + sn.squared(u1) + fn.squared(v1) + mu1.second_moment);
        slack = rhs - lhs;
        break;
      }
    }
    if (slack < rep.worst_margin || std::isnan(slack)) {
      rep.worst_margin = std::isnan(slack) ? -std::numeric_limits<double>::infinity() : slack;
      if (rep.worst_margin < -tolerance) {
        rep.violating_witness = ProbeWitness{u1, u2, v1, v2, mu1, mu2, w, rep.worst_margin};
      }
    }
  }
  return rep;
}

/// Runs every property in the model's declared probe suite.
inline std::vector<HypothesisReport> probe_suite(const ModelSpec& m, std::size_t n_samples,
                                                 const SamplerConfig& sc, std::uint64_t seed,
                                                 double tolerance = 1e-10) {
  std::vector<HypothesisReport> out;
  for (auto p : m.probe_suite) out.push_back(probe_hypothesis(m, p, n_samples, sc, seed, tolerance));
  return out;
}

}  // namespace mvavg
