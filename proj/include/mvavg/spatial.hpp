#pragma once

// Uniform finite-difference discretization of (0,1) with homogeneous
// Dirichlet conditions: the Laplacian, its spectrum, discrete L^r / L2 /
// H^1_0 / H^-1 norms, and truncation onto the lowest sine modes.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "mvavg/error.hpp"

namespace mvavg {

class Grid1D {
 public:
  explicit Grid1D(std::size_t n_interior) : n_(n_interior) {
    if (n_ < 1) throw StructuralError("Grid1D needs at least one interior node");
    dx_ = 1.0 / static_cast<double>(n_ + 1);
  }

  std::size_t n_interior() const noexcept { return n_; }
  double dx() const noexcept { return dx_; }
  /// Coordinate of interior node i (0-based), i.e. (i+1)*dx.
  double x(std::size_t i) const noexcept { return static_cast<double>(i + 1) * dx_; }

  friend bool operator==(const Grid1D&, const Grid1D&) = default;

 private:
  std::size_t n_;
  double dx_;
};

/// Nodal values at the interior points of a grid.
struct Field {
  Field(Grid1D g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n_interior()) throw StructuralError("Field length != grid size");
  }
  explicit Field(Grid1D g) : grid(g), values(g.n_interior(), 0.0) {}

  Grid1D grid;
  std::vector<double> values;
};

/// The (1,-2,1)/dx^2 Dirichlet Laplacian. Negative definite.
struct LaplacianOp {
  explicit LaplacianOp(Grid1D g) : grid(g) {}
  Grid1D grid;
};

namespace detail {

inline void check_len(const Grid1D& g, std::size_t n, const char* what) {
  if (n != g.n_interior()) throw StructuralError(std::string(what) + ": dimension mismatch");
}

}  // namespace detail

/// out_i = (u_{i-1} - 2u_i + u_{i+1}) / dx^2 with zero ghost values.
inline void laplacian_apply(const Grid1D& g, std::span<const double> u, std::span<double> out) {
  detail::check_len(g, u.size(), "laplacian_apply");
  detail::check_len(g, out.size(), "laplacian_apply");
  const std::size_t n = u.size();
  const double inv_dx2 = 1.0 / (g.dx() * g.dx());
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? u[i - 1] : 0.0;
    const double right = i + 1 < n ? u[i + 1] : 0.0;
    out[i] = (left - 2.0 * u[i] + right) * inv_dx2;
  }
}

inline Field laplacian_apply(const LaplacianOp& op, const Field& u) {
  if (!(op.grid == u.grid)) throw StructuralError("laplacian_apply: grid mismatch");
  Field out(u.grid);
  laplacian_apply(op.grid, u.values, out.values);
  return out;
}

/// k-th eigenvalue of -L (k = 1..n): (2/dx^2)(1 - cos(k pi dx)).
inline double dirichlet_eigenvalue(const Grid1D& g, std::size_t k) {
  const double dx = g.dx();
  return 2.0 / (dx * dx) * (1.0 - std::cos(static_cast<double>(k) * std::numbers::pi * dx));
}

/// Smallest eigenvalue of -L; tends to pi^2 from below as dx -> 0.
inline double lambda1(const LaplacianOp& op) { return dirichlet_eigenvalue(op.grid, 1); }

/// Largest eigenvalue of -L.
inline double lambda_max(const LaplacianOp& op) {
  return dirichlet_eigenvalue(op.grid, op.grid.n_interior());
}

/// Solves (shift*I - scale*L) w = rhs by the Thomas algorithm. Requires the
/// system to be diagonally dominant (shift >= 0 or small enough).
inline void solve_shifted_laplacian(const Grid1D& g, double shift, double scale,
                                    std::span<const double> rhs, std::span<double> w) {
  detail::check_len(g, rhs.size(), "solve_shifted_laplacian");
  detail::check_len(g, w.size(), "solve_shifted_laplacian");
  const std::size_t n = rhs.size();
  const double inv_dx2 = 1.0 / (g.dx() * g.dx());
  const double diag = shift + 2.0 * scale * inv_dx2;
  const double off = -scale * inv_dx2;
  // Forward sweep stores modified super-diagonal in a scratch vector.
  std::vector<double> c(n);
  double denom = diag;
  if (denom == 0.0) throw std::runtime_error("solve_shifted_laplacian: singular pivot");
  c[0] = off / denom;
  w[0] = rhs[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = diag - off * c[i - 1];
    if (denom == 0.0 || !std::isfinite(denom)) {
      throw std::runtime_error("solve_shifted_laplacian: singular pivot");
    }
    c[i] = off / denom;
    w[i] = (rhs[i] - off * w[i - 1]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) w[i] -= c[i] * w[i + 1];
}

inline double l2_norm_sq(const Grid1D& g, std::span<const double> u) {
  detail::check_len(g, u.size(), "l2_norm_sq");
  double s = 0.0;
  for (double v : u) s += v * v;
  return g.dx() * s;
}

inline double l2_inner(const Grid1D& g, std::span<const double> u, std::span<const double> v) {
  detail::check_len(g, u.size(), "l2_inner");
  detail::check_len(g, v.size(), "l2_inner");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return g.dx() * s;
}

/// dx * sum over the n+1 cell gaps of the squared forward difference quotient.
inline double h01_norm_sq(const Grid1D& g, std::span<const double> u) {
  detail::check_len(g, u.size(), "h01_norm_sq");
  const std::size_t n = u.size();
  double s = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double left = i > 0 ? u[i - 1] : 0.0;
    const double right = i < n ? u[i] : 0.0;
    const double d = (right - left) / g.dx();
    s += d * d;
  }
  return g.dx() * s;
}

/// dx * u^T (-L)^{-1} v, the discrete H^-1 inner product.
inline double hminus1_inner(const Grid1D& g, std::span<const double> u,
                            std::span<const double> v) {
  std::vector<double> w(u.size());
  solve_shifted_laplacian(g, 0.0, 1.0, v, w);
  return l2_inner(g, u, w);
}

inline double hminus1_norm_sq(const Grid1D& g, std::span<const double> u) {
  return hminus1_inner(g, u, u);
}

inline double hminus1_norm_sq(const LaplacianOp& op, const Field& u) {
  return hminus1_norm_sq(op.grid, u.values);
}

inline double h01_norm_sq(const LaplacianOp& op, const Field& u) {
  return h01_norm_sq(op.grid, u.values);
}

inline double l2_norm_sq(const Grid1D& g, const Field& u) { return l2_norm_sq(g, u.values); }

/// (dx * sum |u_i|^r)^(1/r), r >= 1.
inline double lr_norm(const Grid1D& g, std::span<const double> u, double r) {
  if (!(r >= 1.0)) throw StructuralError("lr_norm needs r >= 1");
  detail::check_len(g, u.size(), "lr_norm");
  if (r == 2.0) return std::sqrt(l2_norm_sq(g, u));
  double s = 0.0;
  for (double v : u) s += std::pow(std::abs(v), r);
  return std::pow(g.dx() * s, 1.0 / r);
}

inline double lr_norm(const Grid1D& g, const Field& u, double r) { return lr_norm(g, u.values, r); }

/// Discrete sine mode e_k(x_i) = sqrt(2) sin(k pi x_i), k >= 1; orthonormal
/// under the dx-weighted inner product.
inline std::vector<double> sine_mode(const Grid1D& g, std::size_t k) {
  std::vector<double> e(g.n_interior());
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = std::numbers::sqrt2 * std::sin(static_cast<double>(k) * std::numbers::pi * g.x(i));
  }
  return e;
}

/// Galerkin truncation onto span{e_1..e_{n_modes}}.
inline Field mode_project(const Field& u, std::size_t n_modes) {
  const Grid1D& g = u.grid;
  if (n_modes < 1 || n_modes > g.n_interior()) {
    throw StructuralError("mode_project: n_modes must be in [1, n_interior]");
  }
  Field out(g);
  for (std::size_t k = 1; k <= n_modes; ++k) {
    const auto e = sine_mode(g, k);
    const double coeff = l2_inner(g, u.values, e);
    for (std::size_t i = 0; i < e.size(); ++i) out.values[i] += coeff * e[i];
  }
  return out;
}

/// Which discrete norm measures a state vector.
enum class NormTag { euclidean, grid_l2, grid_h01, grid_hminus1 };

inline std::string_view to_string(NormTag t) {
  switch (t) {
    case NormTag::euclidean: return "euclidean";
    case NormTag::grid_l2: return "l2";
    case NormTag::grid_h01: return "h01";
    case NormTag::grid_hminus1: return "hminus1";
  }
  return "?";
}

/// A norm tag bound to the grid it needs (if any).
struct StateNorm {
  NormTag tag = NormTag::euclidean;
  std::size_t n_interior = 0;  // 0 for euclidean

  static StateNorm euclidean() { return {}; }
  static StateNorm on_grid(NormTag t, const Grid1D& g) { return {t, g.n_interior()}; }

  double squared(std::span<const double> u) const {
    switch (tag) {
      case NormTag::euclidean: {
        double s = 0.0;
        for (double v : u) s += v * v;
        return s;
      }
      case NormTag::grid_l2: return l2_norm_sq(Grid1D(n_interior), u);
      case NormTag::grid_h01: return h01_norm_sq(Grid1D(n_interior), u);
      case NormTag::grid_hminus1: return hminus1_norm_sq(Grid1D(n_interior), u);
    }
    return 0.0;
  }

  /// Inner product inducing the norm. Not provided for H^1_0.
  double inner(std::span<const double> u, std::span<const double> v) const {
    switch (tag) {
      case NormTag::euclidean: {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
        return s;
      }
      case NormTag::grid_l2: return l2_inner(Grid1D(n_interior), u, v);
      case NormTag::grid_hminus1: return hminus1_inner(Grid1D(n_interior), u, v);
      case NormTag::grid_h01: break;
    }
    throw UnsupportedCase("StateNorm::inner is not provided for the H^1_0 tag");
  }

  double operator()(std::span<const double> u) const { return squared(u); }
};

}  // namespace mvavg
