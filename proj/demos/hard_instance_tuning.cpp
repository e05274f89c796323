// Tunes GD and continuized Nesterov on a small zero-chain PL instance and compares fitted rates.

#include <cstdio>
#include <utility>

#include "plaim/optim.hpp"
#include "plaim/testbed.hpp"
#include "plaim/trajectory.hpp"

int main() {
  using namespace plaim;
  HardInstanceConfig cfg;
  cfg.T = 4;
  cfg.t = 3;
  const auto bench = hard_pl_instance(cfg);
  const Objective& f = bench.objective;
  const Point x0 = Point::Zero(f.dim());
  const double scale = bench.analytic.at("scale");
  const int iters = 3000;

  const auto gd = tune_gd(f, x0, logspace(1e-3 / scale, 1.0 / scale, 13), iters);
  NmGrid grid;
  grid.eta = logspace(1e-3, 1.0, 4);
  grid.eta_prime = logspace(1e-3, 1.0, 4);
  grid.gamma = logspace(1e-3 / scale, 1.0 / scale, 4);
  grid.gamma_prime = logspace(1e-2 / scale, 10.0 / scale, 4);
  const auto nm = tune_nm(f, x0, grid, iters, 0);

  // Fit only the iterations above the round-off floor.
  auto fit = [](const RunRecord& r) {
    std::size_t last = 0;
    for (std::size_t i = 0; i < r.size(); ++i)
      if (r.f_gaps[i] > 1e-13 * r.f_gaps.front()) last = i;
    return fit_rate(r, std::make_pair(last / 10, last + 1), FitAxis::index);
  };
  const RateFit gd_fit = fit(gd.record);
  const RateFit nm_fit = fit(nm.record);
  std::printf("dimension %d, scale %.4g\n", f.dim(), scale);
  std::printf("GD: gamma %.4g, rate %.4g per iteration (%zu cells)\n", gd.best.gamma, gd_fit.rate, gd.evaluated);
  std::printf("NM: eta %.3g eta' %.3g gamma %.3g gamma' %.3g, rate %.4g per iteration (%zu cells)\n", nm.best.eta,
              nm.best.eta_prime, nm.best.gamma, nm.best.gamma_prime, nm_fit.rate, nm.evaluated);
}
