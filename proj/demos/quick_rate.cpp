// Small strong-error sweep on the linear model, written to out/quick_rate.
#include <cstdio>

#include "mvavg/mvavg.hpp"

using namespace mvavg;

int main() {
  StudyConfig c = default_config("linear-benchmark");
  c.particles = 200;
  c.replications = 4;
  c.epsilons = {0.1, 0.05, 0.02, 0.01};
  const RateReport rep = run_rate_study(c);
  for (const auto& r : rep.rows) std::printf("eps=%-6g error_sq=%.4e +/- %.1e\n", r.epsilon, r.error_sq, r.std_error);
  std::printf("slope %.3f (threshold %.2f): %s\n", rep.fit.slope, rep.threshold, rep.verdict ? "pass" : "fail");
  write_report(rep, "out/quick_rate");
  return rep.verdict ? 0 : 4;
}
