// Runs GD and the constant-momentum Nesterov variant on the sine valley and compares their gaps.

#include <cstdio>

#include "plaim/geometry.hpp"
#include "plaim/optim.hpp"
#include "plaim/testbed.hpp"
#include "plaim/trajectory.hpp"

int main() {
  using namespace plaim;
  const auto bench = sine_valley(1e-3);
  const Objective& f = bench.objective;
  GridSpec grid;
  grid.resolution_per_axis = 500;
  const double L = estimate_constants(f, grid).L_smooth;
  const Point x0 = make_point({0.0, 3.0});
  const int iters = 3000;

  const RunRecord gd = run_gd(f, GdConfig{1.0 / L, iters, std::nullopt}, x0);
  const RunRecord nm = run_nm_prime(f, NmPrimeConfig{0.9, 1.0 / L, iters}, x0);

  std::printf("step 1/L with L = %.4g\n", L);
  std::printf("%6s %14s %14s %10s\n", "k", "gap GD", "gap NM'", "aiming NM'");
  for (int k : {0, 10, 50, 100, 500, 1000, 2000, 3000})
    std::printf("%6d %14.6g %14.6g %10.4f\n", k, gd.f_gaps[k], nm.f_gaps[k], nm.aiming_values[k]);

  const AvgAimingReport rep = avg_aiming(nm, 0.0, *f.x_star());
  std::printf("NM' aiming: %d negative steps, averaged value %.4f\n", rep.violated_steps, rep.a_avg_max);
}
