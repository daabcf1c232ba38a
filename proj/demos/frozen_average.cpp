// Estimates the averaged coupling of the cubic mean-field model on a grid of
// frozen slow states and prints it next to the linear-model closed form.
#include <cstdio>

#include "mvavg/mvavg.hpp"

using namespace mvavg;

int main() {
  const ModelSpec cubic = make_model("mvsde-cubic");
  const ModelSpec linear = make_model("linear-benchmark");
  std::puts("x,cubic_fbar,cubic_se,linear_fbar,linear_exact");
  for (double x = -2.0; x <= 2.0 + 1e-12; x += 0.5) {
    FrozenParams fp;
    fp.x = {x};
    fp.mu = MeasureView{{x}, x * x, 1};
    fp.y_init = {0.0};
    fp.sample_horizon = 200.0;
    const auto c = estimate_fbar(cubic, fp, NoisePlan(1));
    const auto l = estimate_fbar(linear, fp, NoisePlan(1));
    std::vector<double> exact(1);
    (*linear.fbar_exact)(fp.x, fp.mu, exact);
    std::printf("%.2f,%.5f,%.5f,%.5f,%.5f\n", x, c.fbar[0], c.std_error[0], l.fbar[0], exact[0]);
  }
}
