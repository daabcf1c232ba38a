#pragma once

// Strong-error estimation between the full and averaged slow processes
// under common noise, epsilon sweeps, rate fitting and CSV reporting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <cstdlib>
#include <tuple>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvavg/averaging.hpp"
#include "mvavg/error.hpp"
#include "mvavg/integrate.hpp"
#include "mvavg/models.hpp"
#include "mvavg/parallel.hpp"

namespace mvavg {

struct StudyConfig {
  std::string model = "linear-benchmark";
  ParamMap params;
  std::size_t particles = 1000;
  std::vector<double> epsilons{0.1, 0.05, 0.02, 0.01, 0.005};
  double horizon = 1.0;
  double h_fraction = 0.02;            // h <= eps * h_fraction
  std::optional<double> h_max;         // absolute cap on the micro step
  double delta_exponent = 2.0 / 3.0;   // delta = eps^delta_exponent
  std::size_t replications = 8;
  std::uint64_t seed = 20240611;
  std::string output_dir = "out";
  AveragedMode averaged_mode = AveragedMode::exact;
  bool averaged_macro_is_stride = true;  // false: macro step = micro step
  std::size_t record_points = 200;
  std::vector<double> x0{1.0};  // scalar amplitude of the first sine mode for fields
  std::vector<double> y0{0.0};
  double initial_spread = 0.0;
  unsigned workers = 1;
  double slope_tolerance = 0.1;
  std::optional<bool> taming;
  HmmConfig hmm;
};

inline std::string to_string(AveragedMode m) { return m == AveragedMode::exact ? "exact" : "hmm"; }

/// Defaults that depend on the model: PDE studies run at reduced resolution
/// with micro-stepped averaged equations; models without a closed-form
/// averaged coupling use the multiscale estimator.
inline StudyConfig default_config(const std::string& model_id) {
  StudyConfig c;
  c.model = model_id;
  const ModelSpec m = make_model(model_id);
  if (m.grid) {
    c.particles = 200;
    c.x0 = {0.2};
    c.averaged_macro_is_stride = false;
    c.epsilons = {0.1, 0.05, 0.02};
    c.replications = 4;
    c.h_max = model_id == "plaplace-1d" ? 5e-5 : 2e-4;
  }
  c.averaged_mode = m.fbar_exact ? AveragedMode::exact : AveragedMode::hmm;
  return c;
}

inline void validate(const StudyConfig& c) {
  if (c.epsilons.empty()) throw ConfigError("epsilons", "epsilon grid is empty");
  for (std::size_t i = 0; i < c.epsilons.size(); ++i) {
    const double e = c.epsilons[i];
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("epsilons", "epsilon values must lie in (0, 1]");
    if (i > 0 && !(e < c.epsilons[i - 1])) {
      throw ConfigError("epsilons", "epsilon grid must be strictly decreasing");
    }
  }
  if (c.replications < 1) throw ConfigError("replications", "replications must be >= 1");
  if (c.particles < 1) throw ConfigError("particles", "particles must be >= 1");
  if (!(c.horizon > 0.0)) throw ConfigError("horizon", "horizon must be > 0");
  if (!(c.h_fraction > 0.0 && c.h_fraction <= 0.1)) {
    throw ConfigError("h_fraction", "h_fraction must lie in (0, 0.1]");
  }
  if (c.h_max && !(*c.h_max > 0.0)) throw ConfigError("h_max", "h_max must be > 0");
  if (!(c.delta_exponent > 0.0)) throw ConfigError("delta_exponent", "delta_exponent must be > 0");
  if (c.record_points < 1) throw ConfigError("record_points", "record_points must be >= 1");
  if (c.workers < 1) throw ConfigError("workers", "workers must be >= 1");
  if (!(c.slope_tolerance >= 0.0 && c.slope_tolerance < 1.0)) {
    throw ConfigError("slope_tolerance", "slope_tolerance must lie in [0, 1)");
  }
  const ModelSpec m = make_model(c.model, c.params);
  if (m.measure_dependent && c.particles < 2) {
    throw ConfigError("particles", "measure-dependent models need particles >= 2");
  }
  if (c.averaged_mode == AveragedMode::exact && !m.fbar_exact) {
    throw ConfigError("averaged_mode", "model " + c.model + " has no closed-form averaged coupling");
  }
  if (c.hmm.replicas < 1) throw ConfigError("hmm.replicas", "hmm.replicas must be >= 1");
  if (c.hmm.refresh < 1) throw ConfigError("hmm.refresh", "hmm.refresh must be >= 1");
  if (!(c.hmm.horizon > 0.0)) throw ConfigError("hmm.horizon", "hmm.horizon must be > 0");
  if (!(c.hmm.micro_step > 0.0)) throw ConfigError("hmm.micro_step", "hmm.micro_step must be > 0");
}

namespace detail {

using nlohmann::json;

inline std::vector<double> number_list(const json& j, const std::string& key) {
  if (j.is_number()) return {j.get<double>()};
  if (!j.is_array()) throw ConfigError(key, key + " must be a number or an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) {
    if (!e.is_number()) throw ConfigError(key, key + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key, "invalid value for " + key);
  }
}

inline std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) {
    throw ConfigError(key, key + " must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

inline void apply_hmm(HmmConfig& h, const json& j) {
  if (!j.is_object()) throw ConfigError("hmm", "hmm must be an object");
  for (const auto& [k, v] : j.items()) {
    const std::string key = "hmm." + k;
    if (k == "replicas") h.replicas = get_count(v, key);
    else if (k == "burn_in") h.burn_in = get_as<double>(v, key);
    else if (k == "warm_burn_in") h.warm_burn_in = get_as<double>(v, key);
    else if (k == "horizon") h.horizon = get_as<double>(v, key);
    else if (k == "micro_step") h.micro_step = get_as<double>(v, key);
    else if (k == "refresh") h.refresh = get_count(v, key);
    else if (k == "warn_fraction") h.warn_fraction = get_as<double>(v, key);
    else if (k == "y_init") h.y_init = number_list(v, key);
    else throw ConfigError(key, "unknown config key '" + key + "'");
  }
}

}  // namespace detail

/// Builds a validated config from parsed JSON. Only "model" is required.
inline StudyConfig config_from_json(const nlohmann::json& j) {
  using detail::get_as;
  if (!j.is_object()) throw ConfigError("", "config must be a JSON object");
  if (!j.contains("model")) throw ConfigError("model", "config must name a model");
  StudyConfig c = default_config(get_as<std::string>(j.at("model"), "model"));
  for (const auto& [k, v] : j.items()) {
    if (k == "model") continue;
    if (k == "params") {
      if (!v.is_object()) throw ConfigError("params", "params must be an object");
      for (const auto& [pk, pv] : v.items()) c.params[pk] = get_as<double>(pv, "params." + pk);
    } else if (k == "particles") c.particles = detail::get_count(v, k);
    else if (k == "epsilons") c.epsilons = detail::number_list(v, k);
    else if (k == "horizon") c.horizon = get_as<double>(v, k);
    else if (k == "h_fraction") c.h_fraction = get_as<double>(v, k);
    else if (k == "h_max") c.h_max = v.is_null() ? std::nullopt : std::optional(get_as<double>(v, k));
    else if (k == "delta_exponent") c.delta_exponent = get_as<double>(v, k);
    else if (k == "replications") c.replications = detail::get_count(v, k);
    else if (k == "seed") c.seed = get_as<std::uint64_t>(v, k);
    else if (k == "output_dir") c.output_dir = get_as<std::string>(v, k);
    else if (k == "averaged_mode") {
      const auto s = get_as<std::string>(v, k);
      if (s == "exact") c.averaged_mode = AveragedMode::exact;
      else if (s == "hmm") c.averaged_mode = AveragedMode::hmm;
      else throw ConfigError(k, "averaged_mode must be \"exact\" or \"hmm\"");
    } else if (k == "averaged_step") {
      const auto s = get_as<std::string>(v, k);
      if (s == "stride") c.averaged_macro_is_stride = true;
      else if (s == "micro") c.averaged_macro_is_stride = false;
      else throw ConfigError(k, "averaged_step must be \"stride\" or \"micro\"");
    } else if (k == "record_points") c.record_points = detail::get_count(v, k);
    else if (k == "x0") c.x0 = detail::number_list(v, k);
    else if (k == "y0") c.y0 = detail::number_list(v, k);
    else if (k == "initial_spread") c.initial_spread = get_as<double>(v, k);
    else if (k == "workers") c.workers = static_cast<unsigned>(detail::get_count(v, k));
    else if (k == "slope_tolerance") c.slope_tolerance = get_as<double>(v, k);
    else if (k == "taming") c.taming = get_as<bool>(v, k);
    else if (k == "hmm") detail::apply_hmm(c.hmm, v);
    else throw ConfigError(k, "unknown config key '" + k + "'");
  }
  validate(c);
  return c;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// Micro step, block size and recording layout for one epsilon.
struct ResolvedRun {
  MultiscaleParams params;
  std::size_t stride_steps = 1;
  std::size_t macro_substeps = 1;
};

inline ResolvedRun resolve_run(const StudyConfig& c, double eps) {
  const double stride = c.horizon / static_cast<double>(c.record_points);
  double cap = eps * c.h_fraction;
  if (c.h_max) cap = std::min(cap, *c.h_max);
  ResolvedRun r;
  r.params.epsilon = eps;
  r.params.t_end = c.horizon;
  r.params.h_micro = step_dividing(stride, cap);
  r.params.delta_block = std::pow(eps, c.delta_exponent);
  r.params.taming = c.taming;
  r.stride_steps = static_cast<std::size_t>(std::llround(stride / r.params.h_micro));
  r.macro_substeps = c.averaged_macro_is_stride ? r.stride_steps : 1;
  return r;
}

/// Initial slow state; for field models a scalar is the amplitude of the
/// first sine mode.
inline std::vector<double> initial_slow(const StudyConfig& c, const ModelSpec& m) {
  if (m.grid && c.x0.size() == 1) {
    auto e = sine_mode(*m.grid, 1);
    for (double& v : e) v *= c.x0[0];
    return e;
  }
  return detail::expand_state(c.x0, m.slow_dim, "x0");
}

inline std::vector<double> initial_fast(const StudyConfig& c, const ModelSpec& m) {
  if (m.grid && c.y0.size() == 1) {
    auto e = sine_mode(*m.grid, 1);
    for (double& v : e) v *= c.y0[0];
    return e;
  }
  return detail::expand_state(c.y0, m.fast_dim, "y0");
}

inline AveragedOptions averaged_options(const StudyConfig& c, const ResolvedRun& r,
                                        const ModelSpec& m) {
  AveragedOptions o;
  o.mode = c.averaged_mode;
  o.macro_substeps = r.macro_substeps;
  o.record_stride_steps = r.stride_steps;
  o.hmm = c.hmm;
  o.initial_spread = c.initial_spread;
  if (c.hmm.y_init.size() == 1 && m.grid) o.hmm.y_init = initial_fast(c, m);
  return o;
}

struct ReplicationError {
  double sup_error_sq = 0.0;       // particle mean of sup over recorded times
  double terminal_error_sq = 0.0;  // particle mean at t_end
  double aux_gap = 0.0;
  double increment_stat = 0.0;
  std::vector<std::string> warnings;
};

/// Sup over recorded times of the squared slow error, averaged over particles.
inline std::pair<double, double> sup_and_terminal_error(const TrajectoryRecorder& full,
                                                        const TrajectoryRecorder& avg,
                                                        const StateNorm& norm) {
  if (full.times.size() != avg.times.size()) {
    throw StructuralError("full and averaged recordings are misaligned");
  }
  const std::size_t n = full.n, d = full.slow_dim;
  std::vector<double> sup(n, 0.0), diff(d);
  double terminal = 0.0;
  for (std::size_t t = 0; t < full.times.size(); ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < d; ++c) diff[c] = full.slow[t][i * d + c] - avg.slow[t][i * d + c];
      const double e = norm.squared(diff);
      sup[i] = std::max(sup[i], e);
      if (t + 1 == full.times.size()) terminal += e;
    }
  }
  double s = 0.0;
  for (double v : sup) s += v;
  return {s / static_cast<double>(n), terminal / static_cast<double>(n)};
}

/// One replication at one epsilon. With crn=false the averaged system is
/// driven by an independent slow noise (variance control).
inline ReplicationError run_replication(const ModelSpec& m, const StudyConfig& c, double eps,
                                        std::uint64_t seed, std::size_t r, bool crn = true) {
  const ResolvedRun run = resolve_run(c, eps);
  const NoisePlan noise(derive_seed(seed, r));
  const NoisePlan control(derive_seed(seed ^ 0xC0FFEE5EEDull, r));
  const auto x0 = initial_slow(c, m);
  const auto y0 = initial_fast(c, m);

  SimulationOptions so;
  so.record_stride_steps = run.stride_steps;
  so.aux_diagnostics = true;
  so.initial_spread = c.initial_spread;
  const auto full = simulate_full(m, x0, y0, c.particles, run.params, noise, so);
  const auto avg = simulate_averaged(m, x0, c.particles, run.params, crn ? noise : control,
                                     averaged_options(c, run, m));
  ReplicationError out;
  std::tie(out.sup_error_sq, out.terminal_error_sq) = sup_and_terminal_error(full, avg, m.slow_norm);
  out.aux_gap = full.aux_gap.value_or(0.0);
  out.increment_stat = full.increment_stat.value_or(0.0);
  out.warnings = full.warnings;
  out.warnings.insert(out.warnings.end(), avg.warnings.begin(), avg.warnings.end());
  return out;
}

struct StrongErrorResult {
  double error_sq = 0.0;
  double std_error = 0.0;
  double aux_gap = 0.0;
  double increment_stat = 0.0;
  std::vector<ReplicationError> replications;
};

/// Mean and standard error across replications (NaN error for R = 1).
inline StrongErrorResult aggregate(std::vector<ReplicationError> reps) {
  StrongErrorResult out;
  const double R = static_cast<double>(reps.size());
  for (const auto& r : reps) {
    out.error_sq += r.sup_error_sq;
    out.aux_gap += r.aux_gap;
    out.increment_stat += r.increment_stat;
  }
  out.error_sq /= R;
  out.aux_gap /= R;
  out.increment_stat /= R;
  if (reps.size() > 1) {
    double ss = 0.0;
    for (const auto& r : reps) ss += (r.sup_error_sq - out.error_sq) * (r.sup_error_sq - out.error_sq);
    out.std_error = std::sqrt(ss / (R - 1.0) / R);
  } else {
    out.std_error = std::numeric_limits<double>::quiet_NaN();
  }
  out.replications = std::move(reps);
  return out;
}

inline StrongErrorResult strong_error(const ModelSpec& m, const StudyConfig& c, double eps,
                                      std::uint64_t seed, bool crn = true,
                                      ThreadPool* pool = nullptr) {
  std::vector<ReplicationError> reps(c.replications);
  for_each_index(pool, c.replications, [&](std::size_t r) {
    try {
      reps[r] = run_replication(m, c, eps, seed, r, crn);
    } catch (const BlowUp& e) {
      throw BlowUp(e.time(), e.particle(),
                   "eps=" + std::to_string(eps) + " seed=" + std::to_string(seed) + ": " + e.what());
    }
  });
  return aggregate(std::move(reps));
}

// ---------------------------------------------------------------------------
// Rate study

struct RateRow {
  double epsilon = 0.0;
  double error_sq = 0.0;
  double std_error = 0.0;
  double aux_gap = 0.0;
  double increment_stat = 0.0;
  bool ok = true;
  std::string failure;
};

struct RateReport {
  std::string model;
  std::vector<RateRow> rows;
  LineFit fit;
  double threshold = 0.0;  // on the error_sq slope
  bool complete = true;
  bool strictly_decreasing = false;
  bool verdict = false;
  std::vector<std::string> warnings;
  std::string settings;  // free-form description for the summary
};

/// Fits log(error_sq) against log(epsilon) and applies the verdict rule:
/// slope >= (2/3)(1 - tolerance) and strictly decreasing errors.
inline void evaluate_rate(RateReport& rep, double slope_tolerance) {
  rep.threshold = 2.0 / 3.0 * (1.0 - slope_tolerance);
  std::vector<double> lx, ly;
  rep.complete = true;
  for (const auto& r : rep.rows) {
    if (!r.ok) {
      rep.complete = false;
      continue;
    }
    if (r.error_sq > 0.0 && std::isfinite(r.error_sq)) {
      lx.push_back(std::log(r.epsilon));
      ly.push_back(std::log(r.error_sq));
    }
  }
  rep.strictly_decreasing = rep.complete && !rep.rows.empty();
  for (std::size_t i = 1; i < rep.rows.size() && rep.strictly_decreasing; ++i) {
    if (!(rep.rows[i].error_sq < rep.rows[i - 1].error_sq)) rep.strictly_decreasing = false;
  }
  if (lx.size() >= 2) {
    rep.fit = fit_line(lx, ly);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.fit = {nan, nan, nan};
  }
  rep.verdict = rep.complete && rep.strictly_decreasing && std::isfinite(rep.fit.slope) &&
                rep.fit.slope >= rep.threshold;
}

/// Report built from given per-epsilon errors (no simulation).
inline RateReport report_from_errors(const std::vector<double>& eps,
                                     const std::vector<double>& error_sq,
                                     double slope_tolerance = 0.1) {
  if (eps.size() != error_sq.size()) throw StructuralError("epsilon/error length mismatch");
  RateReport rep;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    rep.rows.push_back({eps[i], error_sq[i], 0.0, 0.0, 0.0, true, {}});
  }
  evaluate_rate(rep, slope_tolerance);
  return rep;
}

/// Runs every (epsilon, replication) job on a pool of cfg.workers threads
/// and assembles the report in grid order.
inline RateReport run_rate_study(const StudyConfig& c) {
  validate(c);
  if (c.epsilons.size() < 3) throw ConfigError("epsilons", "a rate study needs >= 3 grid points");
  const ModelSpec m = make_model(c.model, c.params);
  const std::size_t E = c.epsilons.size(), R = c.replications;

  struct JobOut {
    std::optional<ReplicationError> value;
    std::string failure;
  };
  std::vector<JobOut> jobs(E * R);
  std::unique_ptr<ThreadPool> pool;
  if (c.workers > 1) pool = std::make_unique<ThreadPool>(c.workers);
  for_each_index(pool.get(), E * R, [&](std::size_t j) {
    const std::size_t e = j / R, r = j % R;
    try {
      jobs[j].value = run_replication(m, c, c.epsilons[e], c.seed, r);
    } catch (const BlowUp& b) {
      jobs[j].failure = b.what();
    }
  });

  RateReport rep;
  rep.model = c.model;
  for (std::size_t e = 0; e < E; ++e) {
    RateRow row;
    row.epsilon = c.epsilons[e];
    std::vector<ReplicationError> reps;
    for (std::size_t r = 0; r < R; ++r) {
      auto& job = jobs[e * R + r];
      if (job.value) {
        reps.push_back(std::move(*job.value));
      } else if (row.ok) {
        row.ok = false;
        row.failure = job.failure;
      }
    }
    if (row.ok) {
      for (const auto& rr : reps) {
        for (const auto& w : rr.warnings) {
          if (std::find(rep.warnings.begin(), rep.warnings.end(), w) == rep.warnings.end()) {
            rep.warnings.push_back(w);
          }
        }
      }
      const auto agg = aggregate(std::move(reps));
      row.error_sq = agg.error_sq;
      row.std_error = agg.std_error;
      row.aux_gap = agg.aux_gap;
      row.increment_stat = agg.increment_stat;
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.error_sq = row.std_error = row.aux_gap = row.increment_stat = nan;
    }
    rep.rows.push_back(std::move(row));
  }
  evaluate_rate(rep, c.slope_tolerance);

  std::ostringstream s;
  s << "particles=" << c.particles << " replications=" << c.replications
    << " horizon=" << c.horizon << " record_points=" << c.record_points
    << " h_fraction=" << c.h_fraction << " delta_exponent=" << c.delta_exponent
    << " averaged_mode=" << to_string(c.averaged_mode) << " seed=" << c.seed;
  rep.settings = s.str();
  return rep;
}

// ---------------------------------------------------------------------------
// Auxiliary-process diagnostic

struct AuxRow {
  double delta = 0.0;
  double gap = 0.0;
  double gap_over_delta = 0.0;
};

struct AuxTable {
  double epsilon = 0.0;
  std::vector<AuxRow> rows;  // increasing delta
  bool monotone = false;
  double ratio_spread = 0.0;  // max/min of gap/delta
};

/// Mean-square gap between the fast process and its block-frozen copy for
/// delta in {eps, eps^(2/3), eps^(1/2)}.
inline AuxTable run_aux_diagnostic(const StudyConfig& c, double eps, ThreadPool* pool = nullptr) {
  validate(c);
  const ModelSpec m = make_model(c.model, c.params);
  const std::vector<double> deltas{eps, std::pow(eps, 2.0 / 3.0), std::sqrt(eps)};
  const std::size_t R = c.replications;
  const auto x0 = initial_slow(c, m);
  const auto y0 = initial_fast(c, m);
  std::vector<double> gaps(deltas.size() * R), used(deltas.size());
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    ResolvedRun run = resolve_run(c, eps);
    run.params.delta_block = deltas[k];
    used[k] = run.params.delta();
  }
  for_each_index(pool, deltas.size() * R, [&](std::size_t j) {
    const std::size_t k = j / R, r = j % R;
    ResolvedRun run = resolve_run(c, eps);
    run.params.delta_block = deltas[k];
    SimulationOptions so;
    so.record_stride_steps = run.stride_steps;
    so.aux_diagnostics = true;
    so.initial_spread = c.initial_spread;
    const auto rec = simulate_full(m, x0, y0, c.particles, run.params,
                                   NoisePlan(derive_seed(c.seed, r)), so);
    gaps[j] = rec.aux_gap.value_or(0.0);
  });
  AuxTable t;
  t.epsilon = eps;
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    double g = 0.0;
    for (std::size_t r = 0; r < R; ++r) g += gaps[k * R + r];
    g /= static_cast<double>(R);
    t.rows.push_back({used[k], g, g / used[k]});
  }
  t.monotone = true;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t k = 0; k < t.rows.size(); ++k) {
    if (k > 0 && !(t.rows[k].gap > t.rows[k - 1].gap)) t.monotone = false;
    lo = std::min(lo, t.rows[k].gap_over_delta);
    hi = std::max(hi, t.rows[k].gap_over_delta);
  }
  t.ratio_spread = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  return t;
}

// ---------------------------------------------------------------------------
// Report files

namespace detail {

inline std::FILE* open_for_write(const std::filesystem::path& p) {
  std::FILE* fp = std::fopen(p.string().c_str(), "w");
  if (!fp) throw std::runtime_error("cannot open " + p.string() + " for writing");
  return fp;
}

inline void close_checked(std::FILE* fp, const std::filesystem::path& p) {
  if (std::fclose(fp) != 0) throw std::runtime_error("write failed: " + p.string());
}

}  // namespace detail

/// Writes rate_report.csv, fit.csv and summary.txt into dir.
inline void write_report(const RateReport& rep, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());

  const fs::path table = fs::path(dir) / "rate_report.csv";
  std::FILE* fp = detail::open_for_write(table);
  std::fputs("epsilon,error_sq,std_error,aux_gap,increment_stat\n", fp);
  for (const auto& r : rep.rows) {
    std::fprintf(fp, "%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epsilon, r.error_sq, r.std_error,
                 r.aux_gap, r.increment_stat);
  }
  detail::close_checked(fp, table);

  const fs::path fit = fs::path(dir) / "fit.csv";
  fp = detail::open_for_write(fit);
  std::fputs("slope,intercept,r_squared,verdict\n", fp);
  std::fprintf(fp, "%.17g,%.17g,%.17g,%s\n", rep.fit.slope, rep.fit.intercept, rep.fit.r_squared,
               rep.verdict ? "pass" : "fail");
  detail::close_checked(fp, fit);

  const fs::path sum = fs::path(dir) / "summary.txt";
  fp = detail::open_for_write(sum);
  std::fprintf(fp, "model: %s\n", rep.model.c_str());
  if (!rep.settings.empty()) std::fprintf(fp, "settings: %s\n", rep.settings.c_str());
  std::fprintf(fp, "error_sq estimates E sup_t ||X^eps_t - Xbar_t||^2 over recorded times\n");
  std::fprintf(fp, "slope of log(error_sq) vs log(eps): %.6g (r^2 = %.6g)\n", rep.fit.slope,
               rep.fit.r_squared);
  std::fprintf(fp, "implied rate on the error itself: %.6g\n", rep.fit.slope / 2.0);
  std::fprintf(fp, "threshold on the error_sq slope: %.6g (error rate %.6g; 1/3 bound minus tolerance)\n",
               rep.threshold, rep.threshold / 2.0);
  std::fprintf(fp, "strictly decreasing: %s\n", rep.strictly_decreasing ? "yes" : "no");
  std::fprintf(fp, "complete: %s\n", rep.complete ? "yes" : "no");
  for (const auto& r : rep.rows) {
    if (!r.ok) std::fprintf(fp, "failed at eps=%.6g: %s\n", r.epsilon, r.failure.c_str());
  }
  for (const auto& w : rep.warnings) std::fprintf(fp, "warning: %s\n", w.c_str());
  std::fprintf(fp, "verdict: %s\n", rep.verdict ? "pass" : "fail");
  detail::close_checked(fp, sum);
}

/// Reads rate_report.csv back into rows.
inline std::vector<RateRow> read_rate_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "epsilon,error_sq,std_error,aux_gap,increment_stat") {
    throw std::runtime_error("unexpected header in " + path);
  }
  std::vector<RateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    RateRow r;
    double* fields[] = {&r.epsilon, &r.error_sq, &r.std_error, &r.aux_gap, &r.increment_stat};
    const char* p = line.c_str();
    for (double* f : fields) {
      char* end = nullptr;
      *f = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("malformed row in " + path + ": " + line);
      p = *end == ',' ? end + 1 : end;
    }
    r.ok = std::isfinite(r.error_sq);
    rows.push_back(r);
  }
  return rows;
}

inline void write_aux_table(const AuxTable& t, const std::string& path) {
  std::FILE* fp = detail::open_for_write(path);
  std::fputs("delta,gap,gap_over_delta\n", fp);
  for (const auto& r : t.rows) std::fprintf(fp, "%.17g,%.17g,%.17g\n", r.delta, r.gap, r.gap_over_delta);
  detail::close_checked(fp, path);
}

}  // namespace mvavg
