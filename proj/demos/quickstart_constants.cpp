// Estimates the geometric constants of two toy objectives and prints the resulting rate table.

#include <cstdio>
#include <string>

#include "plaim/geometry.hpp"
#include "plaim/testbed.hpp"

int main() {
  using namespace plaim;
  for (const auto& bench : {sine_quadratic_1d(5.0, 0.19, 5.0), valley_2d()}) {
    GridSpec grid;
    grid.resolution_per_axis = bench.objective.dim() == 1 ? 100000 : 400;
    const GeometryEstimate est = estimate_constants(bench.objective, grid);
    std::printf("%s on %lld grid points\n", bench.objective.name().c_str(), est.grid_points);
    std::printf("  mu (PL) %.4g  L %.4g  mu0 %.4g  L0 %.4g  a %.4g\n", est.mu_pl, est.L_smooth, est.mu0_qg, est.L0_qg,
                est.a_aim);

    RateConstants c = RateConstants::from(est);
    c.sweep = sqc_sweep(bench.objective, grid, linspace(1e-5, 0.1, 200));
    const auto table = rate_table(c, {{FunctionClass::PL, Algorithm::GD},
                                      {FunctionClass::PL, Algorithm::NM},
                                      {FunctionClass::SQC, Algorithm::GD},
                                      {FunctionClass::SQC, Algorithm::NM}});
    for (const RateEntry& e : table)
      std::printf("  %-4s x %-3s rate %s\n", to_string(e.function_class), to_string(e.algorithm),
                  e.defined ? std::to_string(e.rate).c_str() : "undefined");
  }
}
