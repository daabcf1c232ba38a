#pragma once

// Concrete models and the string-keyed registry.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mvavg/error.hpp"
#include "mvavg/model.hpp"
#include "mvavg/spatial.hpp"

namespace mvavg {

using ParamMap = std::map<std::string, double>;

/// Reads named parameters with defaults and rejects keys nobody asked for.
class ParamReader {
 public:
  ParamReader(const ParamMap& m, std::string model) : m_(m), model_(std::move(model)) {}

  double get(const std::string& key, double fallback) {
    used_.insert(key);
    const auto it = m_.find(key);
    return it == m_.end() ? fallback : it->second;
  }

  std::size_t get_count(const std::string& key, std::size_t fallback) {
    const double v = get(key, static_cast<double>(fallback));
    if (!(v >= 1.0) || v != std::floor(v)) {
      throw ConfigError("params." + key, key + " must be a positive integer");
    }
    return static_cast<std::size_t>(v);
  }

  void finish() const {
    for (const auto& [k, v] : m_) {
      if (!used_.count(k)) {
        throw ConfigError("params." + k, "unknown parameter '" + k + "' for model " + model_);
      }
    }
  }

 private:
  const ParamMap& m_;
  std::string model_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Linear benchmark

struct LinearBenchmarkParams {
  double a11 = -1.0;
  double a12 = 0.5;
  double f0 = 0.5;
  double sigma1 = 1.0;
  double gamma = 1.0;
  double k1 = 1.0;
  double k2 = 0.5;
  double sigma2 = 1.0;
};

inline const std::vector<HypothesisProperty>& all_properties() {
  static const std::vector<HypothesisProperty> all{
      HypothesisProperty::monotonicity_slow,        HypothesisProperty::strict_monotonicity_fast,
      HypothesisProperty::lipschitz_f,              HypothesisProperty::lipschitz_b1,
      HypothesisProperty::lipschitz_b2,             HypothesisProperty::coercivity_slow,
      HypothesisProperty::coercivity_fast};
  return all;
}

namespace detail {

inline double sq(double x) { return x * x; }

inline ModelSpec scalar_shell(std::string id) {
  ModelSpec m;
  m.id = std::move(id);
  m.slow_norm = StateNorm::euclidean();
  m.fast_norm = StateNorm::euclidean();
  m.slow_v_norm_pow = [](std::span<const double> u) { return u[0] * u[0]; };
  m.fast_v_norm_pow = [](std::span<const double> v) { return v[0] * v[0]; };
  return m;
}

}  // namespace detail

/// dX = (a11 X + a12 m + f0 Y) dt + sigma1 dW1,
/// dY = eps^-1 (-gamma Y + k1 X + k2 m) dt + eps^-1/2 sigma2 dW2.
inline ModelSpec make_linear_benchmark(const LinearBenchmarkParams& p) {
  if (!(p.gamma > 0.0)) throw StructuralError("linear benchmark needs gamma > 0");
  using detail::sq;
  ModelSpec m = detail::scalar_shell("linear-benchmark");
  m.a1 = [p](auto u, const MeasureView& mu, auto out) { out[0] = p.a11 * u[0] + p.a12 * mu.mean[0]; };
  m.f = [p](auto, const MeasureView&, auto v, auto out) { out[0] = p.f0 * v[0]; };
  m.b1 = [p](auto, const MeasureView&, auto out) { out[0] = p.sigma1; };
  m.fast_linear = FastLinearPart::diagonal_decay({p.gamma});
  m.g = [p](auto u, const MeasureView& mu, auto, auto out) {
    out[0] = p.k1 * u[0] + p.k2 * mu.mean[0];
  };
  m.b2 = [p](auto, const MeasureView&, auto, auto out) { out[0] = p.sigma2; };
  m.fbar_exact = [p](auto u, const MeasureView& mu, auto out) {
    out[0] = p.f0 * (p.k1 * u[0] + p.k2 * mu.mean[0]) / p.gamma;
  };
  m.measure_dependent = p.a12 != 0.0 || p.k2 != 0.0;

  auto& c = m.constants;
  c.kappa = p.gamma;
  c.lambda = p.gamma;
  c.l_b2 = 0.0;
  c.theta = 1.0;
  c.eta = p.gamma;
  c.c1 = std::max({sq(p.sigma1), std::abs(p.a12), 2.0 * p.a11 + std::abs(p.a12) + c.theta,
                   std::abs(p.f0), 1e-12});
  c.c2 = std::max({sq(p.sigma2), std::abs(p.k1), std::abs(p.k2),
                   std::abs(p.k1) + std::abs(p.k2) - p.gamma, 1e-12});
  m.probe_suite = all_properties();
  return m;
}

// ---------------------------------------------------------------------------
// Scalar mean-field SDE with cubic fast drift and state-dependent fast noise

struct MvsdeCubicParams {
  double kappa = 1.0;
  double k1 = 1.0;
  double sigma_c = 0.5;
  double l_sigma2 = 0.2;
  double c_mu = 0.5;
  double f0 = 1.0;
  double sigma1 = 0.5;
};

/// Slow drift sin(x) + c_mu m + f0 y, fast drift -kappa y - y^3 + k1 x,
/// fast diffusion sigma_c + l_sigma2 tanh(y).
inline ModelSpec make_mvsde_cubic(const MvsdeCubicParams& p) {
  if (!(p.kappa > 0.0)) throw StructuralError("mvsde-cubic needs kappa > 0");
  using detail::sq;
  ModelSpec m = detail::scalar_shell("mvsde-cubic");
  m.a1 = [p](auto u, const MeasureView& mu, auto out) { out[0] = std::sin(u[0]) + p.c_mu * mu.mean[0]; };
  m.f = [p](auto, const MeasureView&, auto v, auto out) { out[0] = p.f0 * v[0]; };
  m.b1 = [p](auto, const MeasureView&, auto out) { out[0] = p.sigma1; };
  m.fast_linear = FastLinearPart::diagonal_decay({p.kappa});
  m.g = [p](auto u, const MeasureView&, auto v, auto out) {
    out[0] = -v[0] * v[0] * v[0] + p.k1 * u[0];
  };
  m.b2 = [p](auto, const MeasureView&, auto v, auto out) {
    out[0] = p.sigma_c + p.l_sigma2 * std::tanh(v[0]);
  };
  m.measure_dependent = p.c_mu != 0.0;

  auto& c = m.constants;
  c.kappa = p.kappa;
  c.lambda = p.kappa;
  c.l_b2 = std::abs(p.l_sigma2);
  c.theta = 1.0;
  c.eta = p.kappa;
  c.c1 = std::max({2.0 + std::abs(p.c_mu), 1.0 + sq(p.sigma1), std::abs(p.f0), 1e-12});
  c.c2 = std::max({2.0 * (sq(p.sigma_c) + sq(p.l_sigma2)), std::abs(p.k1), 1e-12});
  m.probe_suite = all_properties();
  return m;
}

// ---------------------------------------------------------------------------
// Field models on a Dirichlet grid

struct FieldCouplingParams {
  std::size_t n_interior = 63;
  std::size_t slow_modes = 4;
  std::size_t fast_modes = 4;
  double sigma1 = 0.05;
  double sigma2 = 1.0;
  double c_f = 1.0;   // f: c_f v
  double c_m = 0.2;   // f: c_m tanh(m2) tanh(u)
  double c_g = 1.0;   // g: c_g tanh(u)
  double c_gm = 0.5;  // g: c_gm mean(mu)
  double g_v = 1.0;   // g: g_v v
};

struct PorousMediaParams {
  double r = 4.0;
  FieldCouplingParams field;
};

struct PLaplaceParams {
  double p = 3.0;
  FieldCouplingParams field;
};

namespace detail {

/// |x|^(e-2) x, with integer exponents done by multiplication.
inline double signed_power(double x, double e) {
  const double k = e - 2.0;
  if (k == 0.0) return x;
  if (k == 1.0) return std::abs(x) * x;
  if (k == 2.0) return x * x * x;
  return std::pow(std::abs(x), k) * x;
}

inline double abs_power(double x, double e) {
  const double a = std::abs(x);
  if (e == 2.0) return a * a;
  if (e == 3.0) return a * a * a;
  if (e == 4.0) return (a * a) * (a * a);
  return std::pow(a, e);
}

/// Fills everything shared by the two field models except A1, the slow norm
/// and the slow-side probe constants.
inline ModelSpec field_shell(std::string id, const FieldCouplingParams& fp) {
  const Grid1D grid(fp.n_interior);
  if (fp.slow_modes > fp.n_interior || fp.fast_modes > fp.n_interior) {
    throw StructuralError("noise mode count exceeds grid size");
  }
  ModelSpec m;
  m.id = std::move(id);
  m.grid = grid;
  m.slow_dim = m.fast_dim = fp.n_interior;
  m.slow_noise_dim = fp.slow_modes;
  m.fast_noise_dim = fp.fast_modes;
  m.fast_norm = StateNorm::on_grid(NormTag::grid_l2, grid);
  m.fast_v_norm_pow = [grid](std::span<const double> v) { return h01_norm_sq(grid, v); };

  m.f = [fp](auto u, const MeasureView& mu, auto v, auto out) {
    const double s = fp.c_m * std::tanh(mu.second_moment);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = fp.c_f * v[i] + s * std::tanh(u[i]);
  };

  auto mode_matrix = [grid](std::size_t modes, double scale) {
    std::vector<double> mat;
    mat.reserve(grid.n_interior() * modes);
    for (std::size_t k = 1; k <= modes; ++k) {
      for (double e : sine_mode(grid, k)) mat.push_back(scale * e);
    }
    return mat;
  };
  auto b1_mat = mode_matrix(fp.slow_modes, fp.sigma1);
  auto b2_mat = mode_matrix(fp.fast_modes, fp.sigma2);
  m.b1 = [b1_mat](auto, const MeasureView&, auto out) { std::copy(b1_mat.begin(), b1_mat.end(), out.begin()); };
  m.b2 = [b2_mat](auto, const MeasureView&, auto, auto out) { std::copy(b2_mat.begin(), b2_mat.end(), out.begin()); };

  m.fast_linear = FastLinearPart::laplacian(grid, 1.0);
  m.g = [fp](auto u, const MeasureView& mu, auto v, auto out) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      out[i] = fp.g_v * v[i] + fp.c_g * std::tanh(u[i]) + fp.c_gm * mu.mean[i];
    }
  };
  // Invariant mean solves (-Lap - g_v) vbar = c_g tanh(u) + c_gm mean.
  m.fbar_exact = [fp, grid](auto u, const MeasureView& mu, auto out) {
    std::vector<double> rhs(u.size()), vbar(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) rhs[i] = fp.c_g * std::tanh(u[i]) + fp.c_gm * mu.mean[i];
    solve_shifted_laplacian(grid, -fp.g_v, 1.0, rhs, vbar);
    const double s = fp.c_m * std::tanh(mu.second_moment);
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = fp.c_f * vbar[i] + s * std::tanh(u[i]);
  };

  const LaplacianOp op(grid);
  const double lam1 = lambda1(op);
  auto& c = m.constants;
  c.kappa = lam1 - fp.g_v;
  c.lambda = c.kappa;
  c.l_g = std::abs(fp.g_v);
  c.l_b2 = 0.0;
  c.eta = 1.0;
  c.beta = 2.0;
  if (!(c.kappa > 0.0)) throw StructuralError("fast field not dissipative: g_v >= lambda1");
  m.probe_suite = all_properties();
  return m;
}

/// Bound on |d/dr tanh(r^2)|.
inline constexpr double kTanhSquareSlope = 1.2;

}  // namespace detail

/// Slow field A1 = Lap_h(|u|^{r-2} u), error measured in discrete H^-1.
inline ModelSpec make_porous_media_1d(const PorousMediaParams& p) {
  if (!(p.r >= 2.0)) throw StructuralError("porous media needs r >= 2");
  using detail::sq;
  const auto& fp = p.field;
  ModelSpec m = detail::field_shell("porous-media-1d", fp);
  const Grid1D grid = *m.grid;
  const double r = p.r;
  m.slow_norm = StateNorm::on_grid(NormTag::grid_hminus1, grid);
  m.a1 = [grid, r](auto u, const MeasureView&, auto out) {
    std::vector<double> psi(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) psi[i] = detail::signed_power(u[i], r);
    laplacian_apply(grid, psi, out);
  };
  m.slow_v_norm_pow = [grid, r](std::span<const double> u) {
    double s = 0.0;
    for (double x : u) s += detail::abs_power(x, r);
    return grid.dx() * s;
  };
  m.tame_slow_drift = true;

  const LaplacianOp op(grid);
  const double lam1 = lambda1(op), lam_max = lambda_max(op);
  double b1_hs = 0.0;  // ||B1||_HS^2 in H^-1
  for (std::size_t k = 1; k <= fp.slow_modes; ++k) b1_hs += sq(fp.sigma1) / dirichlet_eigenvalue(grid, k);

  auto& c = m.constants;
  c.r = r;
  c.alpha = r;
  c.theta = 1.0;
  c.c1 = std::max({b1_hs, std::abs(fp.c_f) / std::sqrt(lam1),
                   std::abs(fp.c_m) * std::sqrt(lam_max / lam1),
                   std::abs(fp.c_m) * detail::kTanhSquareSlope / std::sqrt(lam1), 1e-12});
  c.c2 = std::max({std::abs(fp.c_g) + static_cast<double>(fp.fast_modes) * sq(fp.sigma2),
                   -lam1 + 2.0 * std::abs(fp.g_v) + std::abs(fp.c_g) + std::abs(fp.c_gm),
                   std::abs(fp.c_gm) * lam_max, 1e-12});
  return m;
}

/// Slow field A1 = D^-(|D^+u|^{p-2} D^+u), error measured in discrete L2.
inline ModelSpec make_plaplace_1d(const PLaplaceParams& p) {
  if (!(p.p >= 2.0)) throw StructuralError("p-Laplace needs p >= 2");
  using detail::sq;
  const auto& fp = p.field;
  ModelSpec m = detail::field_shell("plaplace-1d", fp);
  const Grid1D grid = *m.grid;
  const double pe = p.p;
  m.slow_norm = StateNorm::on_grid(NormTag::grid_l2, grid);
  m.a1 = [grid, pe](auto u, const MeasureView&, auto out) {
    const std::size_t n = u.size();
    const double inv_dx = 1.0 / grid.dx();
    auto flux = [&](std::size_t gap) {  // phi(D+u) across gap between nodes gap-1 and gap
      const double left = gap > 0 ? u[gap - 1] : 0.0;
      const double right = gap < n ? u[gap] : 0.0;
      return detail::signed_power((right - left) * inv_dx, pe);
    };
    double prev = flux(0);
    for (std::size_t i = 0; i < n; ++i) {
      const double next = flux(i + 1);
      out[i] = (next - prev) * inv_dx;
      prev = next;
    }
  };
  m.slow_v_norm_pow = [grid, pe](std::span<const double> u) {
    const std::size_t n = u.size();
    double s = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      const double left = i > 0 ? u[i - 1] : 0.0;
      const double right = i < n ? u[i] : 0.0;
      s += detail::abs_power((right - left) / grid.dx(), pe);
    }
    return grid.dx() * s;
  };
  m.tame_slow_drift = true;

  const double lam1 = lambda1(LaplacianOp(grid));
  auto& c = m.constants;
  c.p = pe;
  c.alpha = pe;
  c.theta = 1.0;
  c.c1 = std::max({static_cast<double>(fp.slow_modes) * sq(fp.sigma1), std::abs(fp.c_f),
                   std::abs(fp.c_m) * detail::kTanhSquareSlope, 1e-12});
  c.c2 = std::max({std::abs(fp.c_g) + static_cast<double>(fp.fast_modes) * sq(fp.sigma2),
                   -lam1 + 2.0 * std::abs(fp.g_v) + std::abs(fp.c_g) + std::abs(fp.c_gm),
                   std::abs(fp.c_gm), 1e-12});
  return m;
}

// ---------------------------------------------------------------------------
// Deliberately broken model: fast drift +y with a dissipativity claim.

inline ModelSpec make_anti_dissipative() {
  ModelSpec m = detail::scalar_shell("anti-dissipative");
  m.a1 = [](auto u, const MeasureView&, auto out) { out[0] = -u[0]; };
  m.f = [](auto, const MeasureView&, auto v, auto out) { out[0] = v[0]; };
  m.b1 = [](auto, const MeasureView&, auto out) { out[0] = 0.1; };
  m.g = [](auto, const MeasureView&, auto v, auto out) { out[0] = v[0]; };
  m.b2 = [](auto, const MeasureView&, auto, auto out) { out[0] = 0.1; };
  m.measure_dependent = false;
  auto& c = m.constants;
  c.kappa = 1.0;
  c.lambda = 1.0;
  c.c1 = 1.0;
  c.c2 = 1.0;
  c.eta = 1.0;
  m.probe_suite = all_properties();
  return m;
}

// ---------------------------------------------------------------------------
// Registry

inline const std::vector<std::string>& registered_models() {
  static const std::vector<std::string> ids{"linear-benchmark", "mvsde-cubic", "porous-media-1d",
                                            "plaplace-1d"};
  return ids;
}

namespace detail {

inline FieldCouplingParams read_field(ParamReader& rd) {
  FieldCouplingParams f;
  f.n_interior = rd.get_count("n_interior", f.n_interior);
  f.slow_modes = rd.get_count("slow_modes", f.slow_modes);
  f.fast_modes = rd.get_count("fast_modes", f.fast_modes);
  f.sigma1 = rd.get("sigma1", f.sigma1);
  f.sigma2 = rd.get("sigma2", f.sigma2);
  f.c_f = rd.get("c_f", f.c_f);
  f.c_m = rd.get("c_m", f.c_m);
  f.c_g = rd.get("c_g", f.c_g);
  f.c_gm = rd.get("c_gm", f.c_gm);
  f.g_v = rd.get("g_v", f.g_v);
  return f;
}

}  // namespace detail

/// Builds a registered model from string id and parameter overrides.
inline ModelSpec make_model(const std::string& id, const ParamMap& params = {}) {
  ParamReader rd(params, id);
  ModelSpec m;
  if (id == "linear-benchmark") {
    LinearBenchmarkParams p;
    p.a11 = rd.get("a11", p.a11);
    p.a12 = rd.get("a12", p.a12);
    p.f0 = rd.get("f0", p.f0);
    p.sigma1 = rd.get("sigma1", p.sigma1);
    p.gamma = rd.get("gamma", p.gamma);
    p.k1 = rd.get("k1", p.k1);
    p.k2 = rd.get("k2", p.k2);
    p.sigma2 = rd.get("sigma2", p.sigma2);
    rd.finish();
    return make_linear_benchmark(p);
  }
  if (id == "mvsde-cubic") {
    MvsdeCubicParams p;
    p.kappa = rd.get("kappa", p.kappa);
    p.k1 = rd.get("k1", p.k1);
    p.sigma_c = rd.get("sigma_c", p.sigma_c);
    p.l_sigma2 = rd.get("l_sigma2", p.l_sigma2);
    p.c_mu = rd.get("c_mu", p.c_mu);
    p.f0 = rd.get("f0", p.f0);
    p.sigma1 = rd.get("sigma1", p.sigma1);
    rd.finish();
    return make_mvsde_cubic(p);
  }
  if (id == "porous-media-1d") {
    PorousMediaParams p;
    p.r = rd.get("r", p.r);
    p.field = detail::read_field(rd);
    rd.finish();
    return make_porous_media_1d(p);
  }
  if (id == "plaplace-1d") {
    PLaplaceParams p;
    p.p = rd.get("p", p.p);
    p.field = detail::read_field(rd);
    rd.finish();
    return make_plaplace_1d(p);
  }
  if (id == "anti-dissipative") {
    rd.finish();
    return make_anti_dissipative();
  }
  throw ConfigError("model", "unknown model id '" + id + "'");
}

}  // namespace mvavg
