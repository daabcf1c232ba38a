#pragma once

// Coefficient bundle of a slow-fast McKean-Vlasov system
//
//   dX = [A1(X, L_X) + f(X, L_X, Y)] dt + B1(X, L_X) dW1
//   dY = (1/eps) A2(X, L_X, Y) dt + (1/sqrt(eps)) B2(X, L_X, Y) dW2
//
// after spatial discretization. The law L_X enters only through the
// empirical MeasureView of the slow particles.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvavg/error.hpp"
#include "mvavg/spatial.hpp"

namespace mvavg {

/// Statistics of the slow empirical measure that the coefficients may read.
struct MeasureView {
  std::vector<double> mean;    // componentwise mean
  double second_moment = 0.0;  // mean of the squared slow norm
  std::size_t count = 0;

  /// Point mass at x.
  static MeasureView dirac(std::span<const double> x, const StateNorm& norm) {
    return {std::vector<double>(x.begin(), x.end()), norm.squared(x), 1};
  }
};

/// View of N row-major states of dimension `dim`.
inline MeasureView measure_view(std::span<const double> rows, std::size_t n, std::size_t dim,
                                const StateNorm& norm) {
  MeasureView mv;
  mv.mean.assign(dim, 0.0);
  mv.count = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = rows.subspan(i * dim, dim);
    for (std::size_t k = 0; k < dim; ++k) mv.mean[k] += row[k];
    mv.second_moment += norm.squared(row);
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double& m : mv.mean) m *= inv;
  mv.second_moment *= inv;
  return mv;
}

/// Linear part of A2 singled out for stiff treatment in the fast step.
struct FastLinearPart {
  enum class Kind { none, diagonal, laplacian };
  Kind kind = Kind::none;
  std::vector<double> rates;  // diagonal: component j contributes -rates[j] * v_j
  double diffusion = 0.0;     // laplacian: diffusion * Lap_h v
  std::size_t n_interior = 0;

  static FastLinearPart diagonal_decay(std::vector<double> r) {
    FastLinearPart p;
    p.kind = Kind::diagonal;
    p.rates = std::move(r);
    return p;
  }
  static FastLinearPart laplacian(const Grid1D& g, double diffusion) {
    FastLinearPart p;
    p.kind = Kind::laplacian;
    p.diffusion = diffusion;
    p.n_interior = g.n_interior();
    return p;
  }

  /// out += linear part applied to v.
  void apply_add(std::span<const double> v, std::span<double> out) const {
    switch (kind) {
      case Kind::none: return;
      case Kind::diagonal:
        for (std::size_t j = 0; j < v.size(); ++j) out[j] -= rates[j] * v[j];
        return;
      case Kind::laplacian: {
        std::vector<double> lv(v.size());
        laplacian_apply(Grid1D(n_interior), v, lv);
        for (std::size_t j = 0; j < v.size(); ++j) out[j] += diffusion * lv[j];
        return;
      }
    }
  }
};

/// Declared structural constants. kappa and l_b2 enter the rate condition
/// kappa > 2 l_b2^2; c1, c2, theta, eta, alpha, beta are the constants the
/// hypothesis probes check against; lambda is the fast dissipativity rate.
struct ModelConstants {
  double kappa = 0.0;
  double l_b2 = 0.0;
  double l_g = 0.0;
  double lambda = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double theta = 1.0;
  double eta = 1.0;
  double alpha = 2.0;
  double beta = 2.0;
  double r = 2.0;
  double p = 2.0;
};

enum class HypothesisProperty {
  monotonicity_slow,
  strict_monotonicity_fast,
  lipschitz_f,
  lipschitz_b1,
  lipschitz_b2,
  coercivity_slow,
  coercivity_fast,
};

inline std::string to_string(HypothesisProperty p) {
  switch (p) {
    case HypothesisProperty::monotonicity_slow: return "monotonicity_slow";
    case HypothesisProperty::strict_monotonicity_fast: return "strict_monotonicity_fast";
    case HypothesisProperty::lipschitz_f: return "lipschitz_f";
    case HypothesisProperty::lipschitz_b1: return "lipschitz_b1";
    case HypothesisProperty::lipschitz_b2: return "lipschitz_b2";
    case HypothesisProperty::coercivity_slow: return "coercivity_slow";
    case HypothesisProperty::coercivity_fast: return "coercivity_fast";
  }
  return "?";
}

inline HypothesisProperty property_from_string(const std::string& s) {
  for (auto p : {HypothesisProperty::monotonicity_slow, HypothesisProperty::strict_monotonicity_fast,
                 HypothesisProperty::lipschitz_f, HypothesisProperty::lipschitz_b1,
                 HypothesisProperty::lipschitz_b2, HypothesisProperty::coercivity_slow,
                 HypothesisProperty::coercivity_fast}) {
    if (to_string(p) == s) return p;
  }
  throw StructuralError("unknown hypothesis property '" + s + "'");
}

struct ModelSpec {
  using SlowFn = std::function<void(std::span<const double> u, const MeasureView& mu,
                                    std::span<double> out)>;
  using CoupledFn = std::function<void(std::span<const double> u, const MeasureView& mu,
                                       std::span<const double> v, std::span<double> out)>;
  using NormPowFn = std::function<double(std::span<const double>)>;

  std::string id;
  std::size_t slow_dim = 1;
  std::size_t fast_dim = 1;
  std::size_t slow_noise_dim = 1;  // m1
  std::size_t fast_noise_dim = 1;  // m2

  SlowFn a1;     // slow drift operator
  CoupledFn f;   // slow/fast coupling drift
  SlowFn b1;     // slow_dim x m1 matrix, column-major
  CoupledFn g;   // A2 minus fast_linear
  CoupledFn b2;  // fast_dim x m2 matrix, column-major
  FastLinearPart fast_linear;

  /// Closed-form averaged coupling, when the invariant law is known.
  std::optional<SlowFn> fbar_exact;

  ModelConstants constants;
  StateNorm slow_norm;
  StateNorm fast_norm;
  NormPowFn slow_v_norm_pow;  // ||u||_{V1}^alpha
  NormPowFn fast_v_norm_pow;  // ||v||_{V2}^beta
  std::optional<Grid1D> grid;

  bool tame_slow_drift = false;
  bool measure_dependent = true;
  std::vector<HypothesisProperty> probe_suite;

  /// Full fast drift A2 = linear part + g.
  void a2(std::span<const double> u, const MeasureView& mu, std::span<const double> v,
          std::span<double> out) const {
    g(u, mu, v, out);
    fast_linear.apply_add(v, out);
  }

  /// kappa > 2 L_{B2}^2, plus the spectral gap condition for PDE models.
  bool claims_rate_bound() const {
    const auto& c = constants;
    bool ok = c.kappa > 2.0 * c.l_b2 * c.l_b2;
    if (grid) ok = ok && lambda1(LaplacianOp(*grid)) - c.l_g - c.l_b2 * c.l_b2 > 0.0;
    return ok;
  }
};

}  // namespace mvavg
