#pragma once

// Euler-Maruyama time stepping of the interacting particle system, with the
// block-frozen auxiliary fast process and in-loop diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvavg/error.hpp"
#include "mvavg/model.hpp"
#include "mvavg/parallel.hpp"
#include "mvavg/rng.hpp"

namespace mvavg {

struct MultiscaleParams {
  double epsilon = 0.1;
  double t_end = 1.0;
  double h_micro = 0.002;
  std::optional<double> delta_block;
  std::optional<bool> taming;  // overrides the model default
  double h_fraction_limit = 0.1;

  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) throw StructuralError("epsilon must lie in (0, 1]");
    if (!(t_end >= 0.0)) throw StructuralError("t_end must be >= 0");
    if (!(h_micro > 0.0)) throw StructuralError("h_micro must be > 0");
    if (h_micro > epsilon * h_fraction_limit * (1.0 + 1e-12)) {
      throw StructuralError("h_micro must not exceed epsilon * " + std::to_string(h_fraction_limit));
    }
    (void)n_steps();
    if (delta_block) (void)delta_steps();
  }

  /// Number of micro steps to reach t_end; t_end must be a multiple of h.
  std::uint64_t n_steps() const {
    const double q = t_end / h_micro;
    const double k = std::round(q);
    if (std::abs(q - k) > 1e-6 * std::max(1.0, q)) {
      throw StructuralError("t_end is not an integer multiple of h_micro");
    }
    return static_cast<std::uint64_t>(k);
  }

  /// Block size in micro steps; defaults to epsilon^(2/3) rounded to h.
  std::uint64_t delta_steps() const {
    const double d = delta_block.value_or(std::pow(epsilon, 2.0 / 3.0));
    if (!(d > 0.0)) throw StructuralError("delta_block must be > 0");
    return static_cast<std::uint64_t>(std::max(1.0, std::round(d / h_micro)));
  }

  double delta() const { return static_cast<double>(delta_steps()) * h_micro; }
};

/// Largest step <= h_cap that divides `stride` evenly.
inline double step_dividing(double stride, double h_cap) {
  const double k = std::ceil(stride / h_cap - 1e-9);
  return stride / std::max(1.0, k);
}

struct ParticleEnsemble {
  std::size_t n = 0;
  std::size_t slow_dim = 1;
  std::size_t fast_dim = 1;
  std::vector<double> slow;  // n x slow_dim
  std::vector<double> fast;  // n x fast_dim
  double time = 0.0;
  std::uint64_t step = 0;
  std::string model_id;

  std::span<double> slow_row(std::size_t i) { return {slow.data() + i * slow_dim, slow_dim}; }
  std::span<const double> slow_row(std::size_t i) const {
    return {slow.data() + i * slow_dim, slow_dim};
  }
  std::span<double> fast_row(std::size_t i) { return {fast.data() + i * fast_dim, fast_dim}; }
  std::span<const double> fast_row(std::size_t i) const {
    return {fast.data() + i * fast_dim, fast_dim};
  }
};

namespace detail {

inline std::vector<double> expand_state(std::span<const double> x, std::size_t dim,
                                        const char* what) {
  if (x.size() == dim) return {x.begin(), x.end()};
  if (x.size() == 1) return std::vector<double>(dim, x[0]);
  throw StructuralError(std::string(what) + ": initial state has wrong dimension");
}

}  // namespace detail

/// N copies of (x0, y0), optionally perturbed by i.i.d. N(0, spread^2)
/// slow noise drawn from a dedicated stream. Scalars broadcast to fields.
inline ParticleEnsemble make_ensemble(const ModelSpec& m, std::span<const double> x0,
                                      std::span<const double> y0, std::size_t n,
                                      const NoisePlan& noise, double spread = 0.0) {
  if (n < 1) throw StructuralError("ensemble needs N >= 1");
  ParticleEnsemble e;
  e.n = n;
  e.slow_dim = m.slow_dim;
  e.fast_dim = m.fast_dim;
  e.model_id = m.id;
  const auto xs = detail::expand_state(x0, m.slow_dim, "x0");
  const auto ys = detail::expand_state(y0, m.fast_dim, "y0");
  e.slow.reserve(n * m.slow_dim);
  e.fast.reserve(n * m.fast_dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m.slow_dim; ++c) {
      double x = xs[c];
      if (spread > 0.0) {
        x += spread * noise.gaussian({NoiseComponent::spread, i, static_cast<std::uint32_t>(c), 0}, 0);
      }
      e.slow.push_back(x);
    }
    e.fast.insert(e.fast.end(), ys.begin(), ys.end());
  }
  return e;
}

/// Scratch buffers for one worker.
struct StepWorkspace {
  explicit StepWorkspace(const ModelSpec& m)
      : drift(m.slow_dim),
        coupling(m.slow_dim),
        b1(m.slow_dim * m.slow_noise_dim),
        xi1(m.slow_noise_dim),
        g(m.fast_dim),
        b2(m.fast_dim * m.fast_noise_dim),
        xi2(m.fast_noise_dim),
        kick(m.fast_dim),
        rhs(m.fast_dim),
        u_new(m.slow_dim),
        v_new(m.fast_dim) {}

  std::vector<double> drift, coupling, b1, xi1, g, b2, xi2, kick, rhs, u_new, v_new;
};

/// out += mat * x for a column-major rows x x.size() matrix.
inline void add_matvec(std::span<const double> mat, std::span<const double> x, double scale,
                       std::span<double> out) {
  const std::size_t rows = out.size();
  for (std::size_t c = 0; c < x.size(); ++c) {
    const double s = scale * x[c];
    if (s == 0.0) continue;
    for (std::size_t r = 0; r < rows; ++r) out[r] += mat[c * rows + r] * s;
  }
}

/// Slow drift A1 + f, tamed if requested.
inline void slow_drift(const ModelSpec& m, std::span<const double> u, const MeasureView& mu,
                       std::span<const double> v, double h, bool tame, StepWorkspace& ws) {
  m.a1(u, mu, ws.drift);
  m.f(u, mu, v, ws.coupling);
  for (std::size_t c = 0; c < ws.drift.size(); ++c) ws.drift[c] += ws.coupling[c];
  if (tame) {
    double s = 0.0;
    for (double d : ws.drift) s += d * d;
    const double hn = h * std::sqrt(s);
    if (hn > 1.0) {
      for (double& d : ws.drift) d /= 1.0 + hn;
    }
  }
}

/// One fast step of size h at scale eps into ws.v_new. The noise stream is
/// (component, particle, mode, extra) at `step`. A diagonal linear part is
/// integrated exactly (exponential Euler); a Laplacian one semi-implicitly.
inline void fast_update(const ModelSpec& m, std::span<const double> u, const MeasureView& mu,
                        std::span<const double> v, double h, double eps, const NoisePlan& noise,
                        StreamId stream, std::uint64_t step, StepWorkspace& ws) {
  const double a = h / eps;
  m.g(u, mu, v, ws.g);
  m.b2(u, mu, v, ws.b2);
  for (std::uint32_t j = 0; j < ws.xi2.size(); ++j) {
    stream.mode = j;
    ws.xi2[j] = noise.gaussian(stream, step);
  }
  std::fill(ws.kick.begin(), ws.kick.end(), 0.0);
  add_matvec(ws.b2, ws.xi2, std::sqrt(h / eps), ws.kick);

  const auto& lin = m.fast_linear;
  switch (lin.kind) {
    case FastLinearPart::Kind::none:
      for (std::size_t j = 0; j < v.size(); ++j) ws.v_new[j] = v[j] + a * ws.g[j] + ws.kick[j];
      break;
    case FastLinearPart::Kind::diagonal:
      for (std::size_t j = 0; j < v.size(); ++j) {
        const double r = lin.rates[j];
        const double x = r * a;
        double decay = 1.0, drive = a, shrink = 1.0;
        if (x != 0.0) {
          decay = std::exp(-x);
          drive = -std::expm1(-x) / r;
          shrink = std::sqrt(-std::expm1(-2.0 * x) / (2.0 * x));
        }
        ws.v_new[j] = decay * v[j] + drive * ws.g[j] + shrink * ws.kick[j];
      }
      break;
    case FastLinearPart::Kind::laplacian:
      for (std::size_t j = 0; j < v.size(); ++j) ws.rhs[j] = v[j] + a * ws.g[j] + ws.kick[j];
      solve_shifted_laplacian(Grid1D(lin.n_interior), 1.0, a * lin.diffusion, ws.rhs, ws.v_new);
      break;
  }
}

/// Slow increment u + h drift + B1 sqrt(h) xi into ws.u_new; the slow noise
/// stream depends only on (particle, mode, step).
inline void slow_update(const ModelSpec& m, std::span<const double> u, const MeasureView& mu,
                        std::span<const double> v, double h, bool tame, const NoisePlan& noise,
                        std::uint64_t particle, std::uint64_t step, StepWorkspace& ws) {
  slow_drift(m, u, mu, v, h, tame, ws);
  m.b1(u, mu, ws.b1);
  for (std::uint32_t j = 0; j < ws.xi1.size(); ++j) {
    ws.xi1[j] = noise.gaussian({NoiseComponent::slow, particle, j, 0}, step);
  }
  for (std::size_t c = 0; c < u.size(); ++c) ws.u_new[c] = u[c] + h * ws.drift[c];
  add_matvec(ws.b1, ws.xi1, std::sqrt(h), ws.u_new);
}

inline bool all_finite(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); });
}

namespace detail {

/// Runs body(i, ws) over particles in contiguous chunks, one workspace per
/// chunk. Returns the lowest particle index the body flagged, if any.
template <typename Body>
std::optional<std::size_t> for_particles(const ModelSpec& m, std::size_t n, ThreadPool* pool,
                                         Body&& body) {
  const std::size_t chunks = pool ? std::min<std::size_t>(n, 4 * pool->size()) : 1;
  std::mutex mu;
  std::optional<std::size_t> bad;
  for_each_index(pool, chunks, [&](std::size_t c) {
    StepWorkspace ws(m);
    const std::size_t lo = c * n / chunks, hi = (c + 1) * n / chunks;
    for (std::size_t i = lo; i < hi; ++i) {
      if (!body(i, ws)) {
        std::lock_guard lock(mu);
        if (!bad || i < *bad) bad = i;
        break;
      }
    }
  });
  return bad;
}

inline bool tame_flag(const ModelSpec& m, const MultiscaleParams& p) {
  return p.taming.value_or(m.tame_slow_drift);
}

/// Advances ens by one micro step in place.
inline void advance_full(const ModelSpec& m, ParticleEnsemble& ens, const MultiscaleParams& p,
                         const NoisePlan& noise, ThreadPool* pool) {
  const MeasureView mu = measure_view(ens.slow, ens.n, ens.slow_dim, m.slow_norm);
  const double h = p.h_micro;
  const bool tame = tame_flag(m, p);
  std::vector<double> next_slow(ens.slow.size()), next_fast(ens.fast.size());
  const auto bad = for_particles(m, ens.n, pool, [&](std::size_t i, StepWorkspace& ws) {
    const auto u = ens.slow_row(i);
    const auto v = ens.fast_row(i);
    slow_update(m, u, mu, v, h, tame, noise, i, ens.step, ws);
    fast_update(m, u, mu, v, h, p.epsilon, noise, {NoiseComponent::fast, i, 0, 0}, ens.step, ws);
    if (!all_finite(ws.u_new) || !all_finite(ws.v_new)) return false;
    std::copy(ws.u_new.begin(), ws.u_new.end(), next_slow.begin() + i * ens.slow_dim);
    std::copy(ws.v_new.begin(), ws.v_new.end(), next_fast.begin() + i * ens.fast_dim);
    return true;
  });
  if (bad) throw BlowUp(ens.time + h, *bad, "full system, eps=" + std::to_string(p.epsilon));
  ens.slow = std::move(next_slow);
  ens.fast = std::move(next_fast);
  ++ens.step;
  ens.time = static_cast<double>(ens.step) * h;
}

}  // namespace detail

/// One Euler-Maruyama micro step for all particles.
inline ParticleEnsemble step_full(const ModelSpec& m, ParticleEnsemble ens,
                                  const MultiscaleParams& p, const NoisePlan& noise,
                                  ThreadPool* pool = nullptr) {
  if (ens.time + p.h_micro > p.t_end + 1e-12) throw StructuralError("step_full: past t_end");
  detail::advance_full(m, ens, p, noise, pool);
  return ens;
}

/// Slow states and measure view captured at the last block boundary.
struct FrozenSnapshot {
  std::vector<double> slow;
  MeasureView view;
};

inline FrozenSnapshot snapshot(const ModelSpec& m, const ParticleEnsemble& ens) {
  return {ens.slow, measure_view(ens.slow, ens.n, ens.slow_dim, m.slow_norm)};
}

/// Advances the auxiliary fast states `aux` (n x fast_dim) by one micro step
/// with coefficients frozen at `snap`, consuming the same fast noise as the
/// true fast process at micro step `step`.
inline void step_khasminskii_aux(const ModelSpec& m, std::vector<double>& aux,
                                 const FrozenSnapshot& snap, const MultiscaleParams& p,
                                 const NoisePlan& noise, std::uint64_t step,
                                 ThreadPool* pool = nullptr) {
  const std::size_t n = snap.slow.size() / m.slow_dim;
  std::vector<double> next(aux.size());
  const auto bad = detail::for_particles(m, n, pool, [&](std::size_t i, StepWorkspace& ws) {
    const std::span<const double> u(snap.slow.data() + i * m.slow_dim, m.slow_dim);
    const std::span<const double> v(aux.data() + i * m.fast_dim, m.fast_dim);
    fast_update(m, u, snap.view, v, p.h_micro, p.epsilon, noise, {NoiseComponent::fast, i, 0, 0},
                step, ws);
    if (!all_finite(ws.v_new)) return false;
    std::copy(ws.v_new.begin(), ws.v_new.end(), next.begin() + i * m.fast_dim);
    return true;
  });
  if (bad) {
    throw BlowUp(static_cast<double>(step + 1) * p.h_micro, *bad, "auxiliary fast process");
  }
  aux = std::move(next);
}

struct TrajectoryRecorder {
  std::size_t n = 0, slow_dim = 1, fast_dim = 1;
  double h_micro = 0.0;
  std::size_t stride_steps = 1;
  double t_end = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> slow;  // one n x slow_dim frame per time
  std::vector<std::vector<double>> fast;  // present when fast recording is on

  // Diagnostics, all time-averaged over [0, t_end] on the micro grid.
  std::optional<double> aux_gap;         // (1/T) int mean |Y - Yhat|^2
  std::optional<double> increment_stat;  // (1/T) int mean ||X_t - X_t(delta)||^2
  double delta = 0.0;
  double fast_moment_sup = 0.0;          // sup_t mean ||Y||^2
  bool moment_flag = false;
  std::vector<std::string> warnings;

  ParticleEnsemble final_state;
};

struct SimulationOptions {
  std::size_t record_stride_steps = 1;
  bool record_fast = false;
  bool aux_diagnostics = false;  // auxiliary process at p.delta_steps()
  double initial_spread = 0.0;
  ThreadPool* pool = nullptr;
};

namespace detail {

inline void record_frame(TrajectoryRecorder& rec, const ParticleEnsemble& e, bool fast) {
  rec.times.push_back(e.time);
  rec.slow.push_back(e.slow);
  if (fast) rec.fast.push_back(e.fast);
}

inline double mean_sq_gap(std::span<const double> a, std::span<const double> b, std::size_t n,
                          std::size_t dim, const StateNorm& norm, std::vector<double>& tmp) {
  tmp.resize(dim);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dim; ++c) tmp[c] = a[i * dim + c] - b[i * dim + c];
    s += norm.squared(tmp);
  }
  return s / static_cast<double>(n);
}

inline double mean_sq(std::span<const double> a, std::size_t n, std::size_t dim,
                      const StateNorm& norm) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += norm.squared(a.subspan(i * dim, dim));
  return s / static_cast<double>(n);
}

}  // namespace detail

/// Iterates the full system from broadcast initial data to p.t_end.
inline TrajectoryRecorder simulate_full(const ModelSpec& m, std::span<const double> x0,
                                        std::span<const double> y0, std::size_t n,
                                        const MultiscaleParams& p, const NoisePlan& noise,
                                        const SimulationOptions& opt = {}) {
  p.validate();
  if (opt.record_stride_steps < 1) throw StructuralError("record stride must be >= 1 step");
  const std::uint64_t steps = p.n_steps();
  ParticleEnsemble ens = make_ensemble(m, x0, y0, n, noise, opt.initial_spread);

  TrajectoryRecorder rec;
  rec.n = n;
  rec.slow_dim = m.slow_dim;
  rec.fast_dim = m.fast_dim;
  rec.h_micro = p.h_micro;
  rec.stride_steps = opt.record_stride_steps;
  rec.t_end = p.t_end;
  detail::record_frame(rec, ens, opt.record_fast);

  const double fast_m2_0 = detail::mean_sq(ens.fast, n, m.fast_dim, m.fast_norm);
  rec.fast_moment_sup = fast_m2_0;
  double slow_m2_max = detail::mean_sq(ens.slow, n, m.slow_dim, m.slow_norm);

  std::uint64_t block = 0;
  std::vector<double> aux;
  FrozenSnapshot snap;
  double gap_sum = 0.0, incr_sum = 0.0;
  std::vector<double> tmp;
  if (opt.aux_diagnostics) {
    block = p.delta_steps();
    aux = ens.fast;
    rec.delta = p.delta();
  }

  for (std::uint64_t k = 0; k < steps; ++k) {
    if (opt.aux_diagnostics) {
      if (k % block == 0) snap = snapshot(m, ens);
      gap_sum += detail::mean_sq_gap(ens.fast, aux, n, m.fast_dim, m.fast_norm, tmp);
      incr_sum += detail::mean_sq_gap(ens.slow, snap.slow, n, m.slow_dim, m.slow_norm, tmp);
      step_khasminskii_aux(m, aux, snap, p, noise, k, opt.pool);
    }
    detail::advance_full(m, ens, p, noise, opt.pool);

    const double fm2 = detail::mean_sq(ens.fast, n, m.fast_dim, m.fast_norm);
    rec.fast_moment_sup = std::max(rec.fast_moment_sup, fm2);
    if ((k + 1) % opt.record_stride_steps == 0) {
      detail::record_frame(rec, ens, opt.record_fast);
      slow_m2_max = std::max(slow_m2_max, detail::mean_sq(ens.slow, n, m.slow_dim, m.slow_norm));
    }
  }

  // Heuristic moment envelope: initial fast moment plus forcing at the
  // declared dissipativity rate.
  const auto& c = m.constants;
  if (c.lambda > 0.0) {
    const double bound = fast_m2_0 + c.c2 * (1.0 + 2.0 * slow_m2_max) / c.lambda;
    rec.moment_flag = rec.fast_moment_sup > 10.0 * bound;
    if (rec.moment_flag) rec.warnings.push_back("fast second moment exceeded its envelope");
  }
  if (opt.aux_diagnostics && steps > 0) {
    rec.aux_gap = gap_sum / static_cast<double>(steps);
    rec.increment_stat = incr_sum / static_cast<double>(steps);
  }
  rec.final_state = std::move(ens);
  return rec;
}

/// (1/T) int_0^T mean ||X_t - X_t(delta)||^2 dt from recorded frames (left
/// Riemann sum on the recording grid). delta must be a multiple of the stride.
inline double increment_stats(const TrajectoryRecorder& rec, double delta, const StateNorm& norm) {
  const double stride = static_cast<double>(rec.stride_steps) * rec.h_micro;
  const double q = delta / stride;
  const double k = std::round(q);
  if (k < 1.0 || std::abs(q - k) > 1e-9 * q) {
    throw StructuralError("increment_stats: recording stride does not divide delta");
  }
  const auto block = static_cast<std::size_t>(k);
  if (rec.times.size() < 2) return 0.0;
  std::vector<double> tmp;
  double s = 0.0;
  const std::size_t frames = rec.times.size() - 1;
  for (std::size_t j = 0; j < frames; ++j) {
    const std::size_t base = (j / block) * block;
    s += detail::mean_sq_gap(rec.slow[j], rec.slow[base], rec.n, rec.slow_dim, norm, tmp);
  }
  return s / static_cast<double>(frames);
}

/// CSV dump: time,particle,component,index,value (slow then fast).
inline void write_trajectory_csv(const TrajectoryRecorder& rec, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  std::fputs("time,particle,component,index,value\n", fp);
  for (std::size_t t = 0; t < rec.times.size(); ++t) {
    for (std::size_t i = 0; i < rec.n; ++i) {
      for (std::size_t c = 0; c < rec.slow_dim; ++c) {
        std::fprintf(fp, "%.17g,%zu,slow,%zu,%.17g\n", rec.times[t], i, c,
                     rec.slow[t][i * rec.slow_dim + c]);
      }
      if (t < rec.fast.size()) {
        for (std::size_t c = 0; c < rec.fast_dim; ++c) {
          std::fprintf(fp, "%.17g,%zu,fast,%zu,%.17g\n", rec.times[t], i, c,
                       rec.fast[t][i * rec.fast_dim + c]);
        }
      }
    }
  }
  if (std::fclose(fp) != 0) throw std::runtime_error("write failed: " + path);
}

}  // namespace mvavg
