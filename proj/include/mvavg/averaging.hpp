#pragma once

// Frozen fast dynamics, ergodic estimates of the averaged coupling, and the
// averaged slow equation (closed-form or heterogeneous multiscale).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvavg/error.hpp"
#include "mvavg/integrate.hpp"
#include "mvavg/model.hpp"
#include "mvavg/parallel.hpp"
#include "mvavg/rng.hpp"

namespace mvavg {

struct FrozenParams {
  std::vector<double> x;       // frozen slow state
  MeasureView mu;              // frozen measure snapshot
  std::vector<double> y_init;  // fast initial state (scalar broadcasts)
  double burn_in = 8.0;
  double sample_horizon = 100.0;
  double micro_step = 0.01;
  std::uint64_t particle = 0;  // noise stream selectors
  std::uint64_t extra = 0;

  std::uint64_t burn_steps() const { return count(burn_in, "burn_in"); }
  std::uint64_t sample_steps() const { return count(sample_horizon, "sample_horizon"); }

 private:
  std::uint64_t count(double span, const char* what) const {
    if (!(span > 0.0)) throw StructuralError(std::string(what) + " must be > 0");
    if (!(micro_step > 0.0)) throw StructuralError("frozen micro_step must be > 0");
    return static_cast<std::uint64_t>(std::max(1.0, std::round(span / micro_step)));
  }
};

namespace detail {

/// Frozen fast dynamics at unit time scale, one micro step at a time.
class FrozenRunner {
 public:
  FrozenRunner(const ModelSpec& m, const FrozenParams& fp, const NoisePlan& noise,
               std::span<const double> y0)
      : m_(m), fp_(fp), noise_(noise), ws_(m), v_(expand_state(y0, m.fast_dim, "y_init")) {
    if (fp.x.size() != m.slow_dim) throw StructuralError("frozen x has wrong dimension");
  }

  void advance() {
    fast_update(m_, fp_.x, fp_.mu, v_, fp_.micro_step, 1.0, noise_,
                {NoiseComponent::frozen, fp_.particle, 0, fp_.extra}, step_, ws_);
    ++step_;
    if (!all_finite(ws_.v_new)) {
      throw BlowUp(static_cast<double>(step_) * fp_.micro_step, fp_.particle, "frozen run");
    }
    v_.swap(ws_.v_new);
  }

  std::span<const double> state() const { return v_; }
  double time() const { return static_cast<double>(step_) * fp_.micro_step; }
  StepWorkspace& workspace() { return ws_; }

 private:
  const ModelSpec& m_;
  const FrozenParams& fp_;
  const NoisePlan& noise_;
  StepWorkspace ws_;
  std::vector<double> v_;
  std::uint64_t step_ = 0;
};

}  // namespace detail

struct FrozenPath {
  std::vector<double> times;   // sample times, after burn-in
  std::vector<double> states;  // times.size() x fast_dim
  std::size_t fast_dim = 1;
  std::vector<double> final_state;

  std::span<const double> at(std::size_t k) const { return {states.data() + k * fast_dim, fast_dim}; }
};

/// Frozen fast path sampled at every micro step after burn-in.
inline FrozenPath frozen_simulate(const ModelSpec& m, const FrozenParams& fp,
                                  const NoisePlan& noise) {
  if (!(m.constants.lambda > 0.0)) {
    throw StructuralError("frozen dynamics needs a positive declared dissipativity rate");
  }
  const auto burn = fp.burn_steps(), n = fp.sample_steps();
  detail::FrozenRunner run(m, fp, noise, fp.y_init);
  for (std::uint64_t k = 0; k < burn; ++k) run.advance();
  FrozenPath path;
  path.fast_dim = m.fast_dim;
  path.times.reserve(n);
  path.states.reserve(n * m.fast_dim);
  for (std::uint64_t k = 0; k < n; ++k) {
    run.advance();
    path.times.push_back(run.time());
    const auto s = run.state();
    path.states.insert(path.states.end(), s.begin(), s.end());
  }
  path.final_state.assign(run.state().begin(), run.state().end());
  return path;
}

struct FrozenEstimate {
  std::vector<double> fbar;
  std::vector<double> std_error;
  double n_effective = 1.0;
  std::optional<double> mixing_rate_estimate;
  std::vector<double> final_state;  // for warm starts
};

inline constexpr std::size_t kBatchCount = 20;

/// Time average of f(x, mu, Y_s) along one post-burn-in frozen path, with
/// a batch-means standard error over 20 batches.
inline FrozenEstimate estimate_fbar(const ModelSpec& m, const FrozenParams& fp,
                                    const NoisePlan& noise) {
  if (!(m.constants.lambda > 0.0)) {
    throw StructuralError("frozen dynamics needs a positive declared dissipativity rate");
  }
  const auto burn = fp.burn_steps(), n = fp.sample_steps();
  if (n < kBatchCount) throw StructuralError("sample_horizon shorter than 20 micro steps");
  const std::uint64_t per_batch = n / kBatchCount;
  const std::size_t d = m.slow_dim;

  detail::FrozenRunner run(m, fp, noise, fp.y_init);
  for (std::uint64_t k = 0; k < burn; ++k) run.advance();

  // Sums are taken relative to the first sample so a constant integrand
  // yields exactly zero spread.
  std::vector<double> fval(d), shift(d), sq(d, 0.0), batch(kBatchCount * d, 0.0);
  for (std::uint64_t k = 0; k < per_batch * kBatchCount; ++k) {
    run.advance();
    m.f(fp.x, fp.mu, run.state(), fval);
    if (k == 0) shift = fval;
    const std::size_t b = k / per_batch;
    for (std::size_t c = 0; c < d; ++c) {
      const double z = fval[c] - shift[c];
      batch[b * d + c] += z;
      sq[c] += z * z;
    }
  }
  // Remaining steps keep the path length equal to the requested horizon.
  for (std::uint64_t k = per_batch * kBatchCount; k < n; ++k) run.advance();

  FrozenEstimate est;
  est.fbar.resize(d);
  est.std_error.resize(d);
  const double total = static_cast<double>(per_batch * kBatchCount);
  double neff = total;
  for (std::size_t c = 0; c < d; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < kBatchCount; ++b) sum += batch[b * d + c];
    const double mean_z = sum / total;
    double ss = 0.0;
    for (std::size_t b = 0; b < kBatchCount; ++b) {
      const double dev = batch[b * d + c] / static_cast<double>(per_batch) - mean_z;
      ss += dev * dev;
    }
    est.fbar[c] = shift[c] + mean_z;
    const double se = std::sqrt(ss / (kBatchCount * (kBatchCount - 1.0)));
    est.std_error[c] = se;
    const double var = std::max(0.0, sq[c] / total - mean_z * mean_z);
    if (se > 0.0) neff = std::min(neff, var / (se * se));
  }
  est.n_effective = std::clamp(neff, 1.0, total);
  est.final_state.assign(run.state().begin(), run.state().end());
  return est;
}

struct MixingEstimate {
  double rate = 0.0;     // fitted decay rate of the squared gap
  bool mixing = false;   // false when the gap does not decay
  std::size_t points = 0;
  double window_end = 0.0;
};

/// Least-squares slope and intercept of y on x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw StructuralError("line fit needs >= 2 paired points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw StructuralError("line fit needs distinct abscissae");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

/// Contraction rate of two frozen copies driven by the same noise, from a
/// least-squares fit of log ||Y - Y'||^2 against time. The fit window ends
/// when the squared gap has shrunk by 1e-12 (or blows past 1e150).
inline MixingEstimate estimate_mixing_rate(const ModelSpec& m, const FrozenParams& fp,
                                           std::span<const double> y_alt, const NoisePlan& noise) {
  const auto total = fp.burn_steps() + fp.sample_steps();
  detail::FrozenRunner a(m, fp, noise, fp.y_init);
  detail::FrozenRunner b(m, fp, noise, y_alt);
  std::vector<double> gap(m.fast_dim);
  auto gap_sq = [&] {
    for (std::size_t j = 0; j < gap.size(); ++j) gap[j] = a.state()[j] - b.state()[j];
    return m.fast_norm.squared(gap);
  };
  const double g0 = gap_sq();
  if (!(g0 > 0.0)) throw StructuralError("estimate_mixing_rate needs y_alt != y_init");

  std::vector<double> ts{0.0}, logs{std::log(g0)};
  MixingEstimate out;
  for (std::uint64_t k = 0; k < total; ++k) {
    try {
      a.advance();
      b.advance();
    } catch (const BlowUp&) {
      break;
    }
    const double g = gap_sq();
    if (!std::isfinite(g) || g > 1e150 * g0 || g <= 1e-12 * g0) break;
    ts.push_back(a.time());
    logs.push_back(std::log(g));
  }
  out.points = ts.size();
  out.window_end = ts.back();
  if (ts.size() < 3) {
    // Immediate collapse counts as (very fast) mixing only if the gap shrank.
    const double g = gap_sq();
    out.mixing = std::isfinite(g) && g < g0;
    out.rate = out.mixing ? std::numeric_limits<double>::infinity() : 0.0;
    return out;
  }
  const auto fit = fit_line(ts, logs);
  out.rate = -fit.slope;
  out.mixing = out.rate > 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Averaged equation

enum class AveragedMode { exact, hmm };

struct HmmConfig {
  std::size_t replicas = 1;
  std::optional<double> burn_in;       // defaults to 8 / lambda
  std::optional<double> warm_burn_in;  // after the first refresh; defaults to burn_in
  double horizon = 10.0;
  double micro_step = 0.02;
  std::size_t refresh = 1;             // re-estimate every `refresh` macro steps
  double warn_fraction = 0.5;
  std::vector<double> y_init{0.0};
};

struct FbarCacheRow {
  std::vector<double> x;
  double mu_m2 = 0.0;
  std::vector<double> mu_mean, fbar, std_error;
};

struct AveragedOptions {
  AveragedMode mode = AveragedMode::exact;
  std::size_t macro_substeps = 1;  // micro steps per macro step
  std::size_t record_stride_steps = 1;
  HmmConfig hmm;
  double initial_spread = 0.0;
  ThreadPool* pool = nullptr;
  std::vector<FbarCacheRow>* cache = nullptr;
};

/// Integrates the averaged slow equation with macro step
/// macro_substeps * h_micro. The Brownian increment over a macro step is the
/// sum of the slow-noise micro increments the full system draws.
inline TrajectoryRecorder simulate_averaged(const ModelSpec& m, std::span<const double> x0,
                                            std::size_t n, const MultiscaleParams& p,
                                            const NoisePlan& noise,
                                            const AveragedOptions& opt = {}) {
  p.validate();
  const std::size_t sub = opt.macro_substeps;
  if (sub < 1) throw StructuralError("macro_substeps must be >= 1");
  if (opt.record_stride_steps % sub != 0) {
    throw StructuralError("recording stride must be a multiple of the macro step");
  }
  const std::uint64_t steps = p.n_steps();
  if (steps % sub != 0) throw StructuralError("t_end must be a multiple of the macro step");
  if (opt.mode == AveragedMode::exact && !m.fbar_exact) {
    throw UnsupportedCase("model " + m.id + " has no closed-form averaged coupling; use hmm");
  }
  const bool hmm = opt.mode == AveragedMode::hmm;
  const HmmConfig& hc = opt.hmm;
  if (hmm && (hc.replicas < 1 || hc.refresh < 1)) {
    throw StructuralError("hmm replicas and refresh must be >= 1");
  }
  const double burn = hc.burn_in.value_or(8.0 / m.constants.lambda);
  const double warm_burn = hc.warm_burn_in.value_or(burn);

  const std::vector<double> y_dummy{0.0};
  ParticleEnsemble ens = make_ensemble(m, x0, y_dummy, n, noise, opt.initial_spread);
  ens.fast.clear();
  const double h = p.h_micro, H = static_cast<double>(sub) * h;
  const bool tame = detail::tame_flag(m, p);

  TrajectoryRecorder rec;
  rec.n = n;
  rec.slow_dim = m.slow_dim;
  rec.fast_dim = m.fast_dim;
  rec.h_micro = h;
  rec.stride_steps = opt.record_stride_steps;
  rec.t_end = p.t_end;
  rec.times.push_back(0.0);
  rec.slow.push_back(ens.slow);

  const std::size_t ds = m.slow_dim;
  std::vector<double> fbar(n * ds), fbar_se(n * ds);
  std::vector<std::vector<double>> warm;
  if (hmm) {
    const auto y0 = detail::expand_state(hc.y_init, m.fast_dim, "hmm y_init");
    warm.assign(n * hc.replicas, y0);
  }
  std::size_t warn_count = 0;
  std::mutex warn_mu;

  for (std::uint64_t K = 0; K * sub < steps; ++K) {
    const std::uint64_t k0 = K * sub;
    const MeasureView mu = measure_view(ens.slow, n, ds, m.slow_norm);
    const bool refresh = hmm && K % hc.refresh == 0;
    const std::uint64_t refresh_idx = K / std::max<std::size_t>(1, hc.refresh);

    if (refresh) {
      for_each_index(opt.pool, n, [&](std::size_t i) {
        std::vector<double> acc(ds, 0.0), var(ds, 0.0);
        for (std::size_t r = 0; r < hc.replicas; ++r) {
          FrozenParams fp;
          fp.x.assign(ens.slow_row(i).begin(), ens.slow_row(i).end());
          fp.mu = mu;
          fp.y_init = warm[i * hc.replicas + r];
          fp.burn_in = refresh_idx == 0 ? burn : warm_burn;
          fp.sample_horizon = hc.horizon;
          fp.micro_step = hc.micro_step;
          fp.particle = i;
          fp.extra = refresh_idx * hc.replicas + r;
          auto est = estimate_fbar(m, fp, noise);
          for (std::size_t c = 0; c < ds; ++c) {
            acc[c] += est.fbar[c];
            var[c] += est.std_error[c] * est.std_error[c];
          }
          warm[i * hc.replicas + r] = std::move(est.final_state);
        }
        const double inv = 1.0 / static_cast<double>(hc.replicas);
        for (std::size_t c = 0; c < ds; ++c) {
          fbar[i * ds + c] = acc[c] * inv;
          fbar_se[i * ds + c] = std::sqrt(var[c]) * inv;
        }
      });
    } else if (!hmm) {
      for (std::size_t i = 0; i < n; ++i) {
        (*m.fbar_exact)(ens.slow_row(i), mu, std::span<double>(fbar.data() + i * ds, ds));
      }
    }

    std::vector<double> next(ens.slow.size());
    const auto bad = detail::for_particles(m, n, opt.pool, [&](std::size_t i, StepWorkspace& ws) {
      const auto u = ens.slow_row(i);
      const std::span<const double> fb(fbar.data() + i * ds, ds);
      m.a1(u, mu, ws.drift);
      double dn = 0.0, sn = 0.0;
      for (std::size_t c = 0; c < ds; ++c) {
        ws.drift[c] += fb[c];
        dn += ws.drift[c] * ws.drift[c];
        sn += fbar_se[i * ds + c] * fbar_se[i * ds + c];
      }
      if (refresh && std::sqrt(sn) > hc.warn_fraction * std::sqrt(dn)) {
        std::lock_guard lock(warn_mu);
        ++warn_count;
      }
      if (tame && H * std::sqrt(dn) > 1.0) {
        for (double& d : ws.drift) d /= 1.0 + H * std::sqrt(dn);
      }
      m.b1(u, mu, ws.b1);
      for (std::uint32_t j = 0; j < ws.xi1.size(); ++j) {
        double sum = 0.0;
        for (std::size_t s = 0; s < sub; ++s) {
          sum += noise.gaussian({NoiseComponent::slow, i, j, 0}, k0 + s);
        }
        ws.xi1[j] = sum;
      }
      for (std::size_t c = 0; c < ds; ++c) ws.u_new[c] = u[c] + H * ws.drift[c];
      add_matvec(ws.b1, ws.xi1, std::sqrt(h), ws.u_new);
      if (!all_finite(ws.u_new)) return false;
      std::copy(ws.u_new.begin(), ws.u_new.end(), next.begin() + i * ds);
      return true;
    });
    if (bad) throw BlowUp(static_cast<double>(k0 + sub) * h, *bad, "averaged equation");

    if (opt.cache && (refresh || !hmm)) {
      for (std::size_t i = 0; i < n; ++i) {
        FbarCacheRow row;
        row.x.assign(ens.slow_row(i).begin(), ens.slow_row(i).end());
        row.mu_mean = mu.mean;
        row.mu_m2 = mu.second_moment;
        row.fbar.assign(fbar.begin() + i * ds, fbar.begin() + (i + 1) * ds);
        row.std_error.assign(fbar_se.begin() + i * ds, fbar_se.begin() + (i + 1) * ds);
        opt.cache->push_back(std::move(row));
      }
    }

    ens.slow = std::move(next);
    ens.step = k0 + sub;
    ens.time = static_cast<double>(ens.step) * h;
    if (ens.step % opt.record_stride_steps == 0) {
      rec.times.push_back(ens.time);
      rec.slow.push_back(ens.slow);
    }
  }
  if (warn_count > 0) {
    rec.warnings.push_back(std::to_string(warn_count) +
                           " averaged-coupling estimates had std_error above " +
                           std::to_string(hc.warn_fraction) + " x drift magnitude");
  }
  rec.final_state = std::move(ens);
  return rec;
}

/// CSV dump of averaged-coupling evaluations: x,mu_mean,mu_m2,fbar,std_error
/// (one row per evaluation and component).
inline void write_fbar_cache(const std::vector<FbarCacheRow>& rows, const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + path + " for writing");
  std::fputs("x,mu_mean,mu_m2,fbar,std_error\n", fp);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.x.size(); ++c) {
      std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.x[c], r.mu_mean[c], r.mu_m2, r.fbar[c],
                   r.std_error[c]);
    }
  }
  if (std::fclose(fp) != 0) throw std::runtime_error("write failed: " + path);
}

}  // namespace mvavg
