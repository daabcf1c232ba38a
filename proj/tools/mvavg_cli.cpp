// Command-line driver: simulate, freeze, average, rate-study, probe, aux.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "mvavg/mvavg.hpp"

using namespace mvavg;
namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kBlowUp = 3, kVerdict = 4 };

struct CommonArgs {
  std::string config_path;
  std::string model;
  std::vector<std::string> params;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> workers;
};

void add_common(CLI::App* sub, CommonArgs& a) {
  sub->add_option("--config", a.config_path, "JSON study configuration")->check(CLI::ExistingFile);
  sub->add_option("--model", a.model, "model id (overrides the config)");
  sub->add_option("--param", a.params, "model parameter override key=value")->take_all();
  sub->add_option("--seed", a.seed, "master seed (overrides MVAVG_SEED and the config)");
  sub->add_option("--out", a.out, "output directory");
  sub->add_option("--workers", a.workers, "worker threads")->check(CLI::PositiveNumber);
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw ConfigError(key, key + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t parse_seed(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty() || text[0] == '-')
    throw ConfigError(key, key + ": not an unsigned 64-bit seed: '" + text + "'");
  return v;
}

StudyConfig build_config(const CommonArgs& a) {
  StudyConfig c;
  if (!a.config_path.empty()) {
    c = load_config(a.config_path);
    if (!a.model.empty()) c.model = a.model;
  } else {
    c = default_config(a.model.empty() ? "linear-benchmark" : a.model);
  }
  for (const auto& kv : a.params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("param", "--param expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    c.params[key] = parse_number("params." + key, kv.substr(eq + 1));
  }
  if (const char* env = std::getenv("MVAVG_SEED")) c.seed = parse_seed("MVAVG_SEED", env);
  if (a.seed) c.seed = *a.seed;
  if (!a.out.empty()) c.output_dir = a.out;
  if (a.workers) c.workers = *a.workers;
  validate(c);
  return c;
}

fs::path ensure_dir(const StudyConfig& c) {
  fs::path d(c.output_dir);
  fs::create_directories(d);
  return d;
}

std::unique_ptr<ThreadPool> make_pool(const StudyConfig& c) {
  return c.workers > 1 ? std::make_unique<ThreadPool>(c.workers) : nullptr;
}

double pick_epsilon(const StudyConfig& c, std::optional<double> eps) {
  const double e = eps.value_or(c.epsilons.front());
  if (!(e > 0.0)) throw ConfigError("epsilon", "epsilon must be > 0");
  return e;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

int cmd_simulate(const CommonArgs& a, std::optional<double> eps_opt, bool record_fast) {
  const auto c = build_config(a);
  const auto m = make_model(c.model, c.params);
  const double eps = pick_epsilon(c, eps_opt);
  const auto run = resolve_run(c, eps);
  auto pool = make_pool(c);
  SimulationOptions so;
  so.record_stride_steps = run.stride_steps;
  so.record_fast = record_fast;
  so.aux_diagnostics = true;
  so.initial_spread = c.initial_spread;
  so.pool = pool.get();
  const auto rec = simulate_full(m, initial_slow(c, m), initial_fast(c, m), c.particles, run.params,
                                 NoisePlan(c.seed), so);
  const auto path = ensure_dir(c) / "trajectory.csv";
  write_trajectory_csv(rec, path.string());
  print_warnings(rec.warnings);
  std::cout << "model=" << c.model << " eps=" << eps << " h=" << run.params.h_micro
            << " frames=" << rec.times.size() << " aux_gap=" << rec.aux_gap.value_or(0.0)
            << " increment_stat=" << rec.increment_stat.value_or(0.0) << "\nwrote " << path.string() << "\n";
  return kOk;
}

struct FreezeArgs {
  std::vector<double> x;
  std::vector<double> mu_mean;
  std::optional<double> mu_m2;
  double burn_in = 8.0;
  double horizon = 100.0;
  double micro_step = 0.01;
};

int cmd_freeze(const CommonArgs& a, const FreezeArgs& f) {
  auto c = build_config(a);
  const auto m = make_model(c.model, c.params);
  if (!f.x.empty()) c.x0 = f.x;
  FrozenParams fp;
  fp.x = initial_slow(c, m);
  fp.mu = MeasureView::dirac(fp.x, m.slow_norm);
  fp.mu.count = c.particles;
  if (!f.mu_mean.empty()) {
    StudyConfig tmp = c;
    tmp.x0 = f.mu_mean;
    fp.mu.mean = initial_slow(tmp, m);
  }
  if (f.mu_m2) fp.mu.second_moment = *f.mu_m2;
  fp.y_init = initial_fast(c, m);
  fp.burn_in = f.burn_in;
  fp.sample_horizon = f.horizon;
  fp.micro_step = f.micro_step;
  const auto est = estimate_fbar(m, fp, NoisePlan(c.seed));
  const auto path = ensure_dir(c) / "fbar.csv";
  std::FILE* fp_out = std::fopen(path.string().c_str(), "w");
  if (!fp_out) throw std::runtime_error("cannot open " + path.string());
  std::fputs("index,fbar,std_error\n", fp_out);
  for (std::size_t i = 0; i < est.fbar.size(); ++i)
    std::fprintf(fp_out, "%zu,%.17g,%.17g\n", i, est.fbar[i], est.std_error[i]);
  std::fclose(fp_out);
  if (est.fbar.size() <= 8) {
    for (std::size_t i = 0; i < est.fbar.size(); ++i)
      std::cout << "fbar[" << i << "] = " << est.fbar[i] << " +/- " << est.std_error[i] << "\n";
  }
  std::cout << "n_effective=" << est.n_effective << "\nwrote " << path.string() << "\n";
  return kOk;
}

int cmd_average(const CommonArgs& a, std::optional<double> eps_opt) {
  const auto c = build_config(a);
  const auto m = make_model(c.model, c.params);
  const double eps = pick_epsilon(c, eps_opt);
  const auto run = resolve_run(c, eps);
  auto pool = make_pool(c);
  auto opt = averaged_options(c, run, m);
  opt.pool = pool.get();
  std::vector<FbarCacheRow> cache;
  if (c.averaged_mode == AveragedMode::hmm) opt.cache = &cache;
  const auto rec = simulate_averaged(m, initial_slow(c, m), c.particles, run.params, NoisePlan(c.seed), opt);
  const auto dir = ensure_dir(c);
  write_trajectory_csv(rec, (dir / "averaged.csv").string());
  if (!cache.empty()) write_fbar_cache(cache, (dir / "fbar_cache.csv").string());
  print_warnings(rec.warnings);
  std::cout << "model=" << c.model << " mode=" << to_string(c.averaged_mode) << " frames=" << rec.times.size()
            << "\nwrote " << (dir / "averaged.csv").string() << "\n";
  return kOk;
}

int cmd_rate_study(const CommonArgs& a) {
  const auto c = build_config(a);
  const auto rep = run_rate_study(c);
  write_report(rep, c.output_dir);
  print_warnings(rep.warnings);
  for (const auto& r : rep.rows) {
    std::cout << "eps=" << r.epsilon;
    if (r.ok)
      std::cout << " error_sq=" << r.error_sq << " std_error=" << r.std_error << "\n";
    else
      std::cout << " FAILED: " << r.failure << "\n";
  }
  std::cout << "slope=" << rep.fit.slope << " threshold=" << rep.threshold
            << " decreasing=" << (rep.strictly_decreasing ? "yes" : "no")
            << " verdict=" << (rep.verdict ? "pass" : "fail") << "\nwrote " << c.output_dir << "\n";
  if (!rep.complete) return kBlowUp;
  return rep.verdict ? kOk : kVerdict;
}

int cmd_probe(const CommonArgs& a, std::size_t samples, bool all) {
  const auto c = build_config(a);
  std::vector<ModelSpec> models;
  if (all) {
    for (const auto& id : registered_models()) models.push_back(make_model(id));
    models.push_back(make_anti_dissipative());
  } else {
    models.push_back(make_model(c.model, c.params));
  }
  const auto path = ensure_dir(c) / "probes.csv";
  std::FILE* out = std::fopen(path.string().c_str(), "w");
  if (!out) throw std::runtime_error("cannot open " + path.string());
  std::fputs("model,property,samples,worst_margin,violated\n", out);
  for (const auto& m : models) {
    for (const auto& rep : probe_suite(m, samples, {}, c.seed)) {
      const bool bad = rep.violating_witness.has_value();
      std::fprintf(out, "%s,%s,%zu,%.17g,%d\n", m.id.c_str(), to_string(rep.property).c_str(), rep.samples,
                   rep.worst_margin, bad ? 1 : 0);
      std::cout << m.id << " " << to_string(rep.property) << " worst_margin=" << rep.worst_margin
                << (bad ? " VIOLATED" : "") << "\n";
    }
  }
  std::fclose(out);
  std::cout << "wrote " << path.string() << "\n";
  return kOk;
}

int cmd_aux(const CommonArgs& a, std::optional<double> eps_opt) {
  const auto c = build_config(a);
  const double eps = pick_epsilon(c, eps_opt);
  auto pool = make_pool(c);
  const auto t = run_aux_diagnostic(c, eps, pool.get());
  const auto path = ensure_dir(c) / "aux.csv";
  write_aux_table(t, path.string());
  for (const auto& r : t.rows)
    std::cout << "delta=" << r.delta << " gap=" << r.gap << " gap/delta=" << r.gap_over_delta << "\n";
  std::cout << "monotone=" << (t.monotone ? "yes" : "no") << " ratio_spread=" << t.ratio_spread << "\nwrote "
            << path.string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast mean-field averaging: simulation and rate studies"};
  app.require_subcommand(1);

  CommonArgs common;
  std::optional<double> eps;
  bool record_fast = false;
  FreezeArgs freeze;
  std::size_t probe_samples = 10000;
  bool probe_all = false;

  auto* sim = app.add_subcommand("simulate", "one full multiscale run; writes trajectory.csv");
  add_common(sim, common);
  sim->add_option("--epsilon", eps, "scale separation (default: first grid value)");
  sim->add_flag("--record-fast", record_fast, "also record fast states");

  auto* frz = app.add_subcommand("freeze", "estimate the averaged coefficient at a frozen (x, mu)");
  add_common(frz, common);
  frz->add_option("--x", freeze.x, "slow state (scalar is a first-mode amplitude for fields)")->take_all();
  frz->add_option("--mu-mean", freeze.mu_mean, "measure mean (default: x)")->take_all();
  frz->add_option("--mu-m2", freeze.mu_m2, "measure second moment (default: |x|^2)");
  frz->add_option("--burn-in", freeze.burn_in, "burn-in time")->check(CLI::PositiveNumber);
  frz->add_option("--horizon", freeze.horizon, "sampling horizon")->check(CLI::PositiveNumber);
  frz->add_option("--micro-step", freeze.micro_step, "frozen micro step")->check(CLI::PositiveNumber);

  auto* avg = app.add_subcommand("average", "averaged-equation run; writes averaged.csv");
  add_common(avg, common);
  avg->add_option("--epsilon", eps, "scale separation for the step size (default: first grid value)");

  auto* rate = app.add_subcommand("rate-study", "strong-error sweep over the epsilon grid");
  add_common(rate, common);

  auto* prb = app.add_subcommand("probe", "randomized hypothesis probes");
  add_common(prb, common);
  prb->add_option("--samples", probe_samples, "samples per property")->check(CLI::PositiveNumber);
  prb->add_flag("--all", probe_all, "probe every registered model and the broken test model");

  auto* aux = app.add_subcommand("aux", "auxiliary-process gap versus block size");
  add_common(aux, common);
  aux->add_option("--epsilon", eps, "scale separation (default: first grid value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(common, eps, record_fast);
    if (frz->parsed()) return cmd_freeze(common, freeze);
    if (avg->parsed()) return cmd_average(common, eps);
    if (rate->parsed()) return cmd_rate_study(common);
    if (prb->parsed()) return cmd_probe(common, probe_samples, probe_all);
    if (aux->parsed()) return cmd_aux(common, eps);
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return kConfig;
  } catch (const BlowUp& e) {
    std::cerr << "blow-up: " << e.what() << "\n";
    return kBlowUp;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kOk;
}
