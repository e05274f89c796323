// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_OPTIM_HPP
#define PLAIM_OPTIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "plaim/objective.hpp"
#include "plaim/parallel.hpp"

namespace plaim {

struct GdConfig {
  double gamma = 0.0;
  int iters = 0;
  std::optional<std::uint64_t> seed;
};

struct HbConfig {
  double alpha = 0.0;
  double eta = 0.0;
  int iters = 0;
};

struct NmPrimeConfig {
  double alpha = 0.0;
  double gamma = 0.0;
  int iters = 0;
};

struct NmContinuizedConfig {
  double eta = 0.0;
  double eta_prime = 0.0;
  double gamma = 0.0;
  double gamma_prime = 0.0;
  int iters = 0;
  std::uint64_t seed = 0;
};

enum class NoiseKind { none, two_point_multiplicative };

struct NoiseModel {
  double rho = 1.0;
  NoiseKind kind = NoiseKind::none;

  static NoiseModel exact() { return {}; }
  static NoiseModel two_point(double rho) { return {rho, NoiseKind::two_point_multiplicative}; }
  void validate() const {
    if (!(rho >= 1.0)) throw InvalidParamError("noise model: rho must be >= 1");
    if (kind == NoiseKind::none && rho != 1.0) throw InvalidParamError("noise model: kind none requires rho = 1");
  }
};

/// Trace of one discrete run. Entry k describes iterate x_k; aiming, PL value and gradient norm
/// are taken at the probe point where the method evaluates its gradient (x_k for GD and HB,
/// the extrapolated point y_k for the Nesterov variants).
struct RunRecord {
  std::vector<Point> iterates;
  std::vector<Point> probes;
  std::vector<double> f_gaps;
  std::vector<double> grad_norms;
  std::vector<double> times;
  std::vector<double> aiming_values;
  std::vector<double> pl_values;
  bool diverged = false;

  std::size_t size() const { return f_gaps.size(); }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double exp1(std::mt19937_64& rng) { return -std::log1p(-uniform01(rng)); }

/// Appends entry k. Returns false when the divergence guard trips.
inline bool record_step(RunRecord& rec, const Objective& obj, const Point& x, const Point& probe, const Point& g_probe,
                        double time) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double fs = obj.f_star().value_or(0.0);
  const double gap = obj.eval(x) - fs;
  rec.iterates.push_back(x);
  rec.probes.push_back(probe);
  rec.f_gaps.push_back(gap);
  rec.times.push_back(time);
  const double ng = g_probe.norm();
  rec.grad_norms.push_back(ng);
  double aim = nan;
  if (obj.x_star()) {
    const Point r = probe - *obj.x_star();
    const double nr = r.norm();
    if (nr > 0.0 && ng > 0.0) aim = std::clamp(g_probe.dot(r) / (ng * nr), -1.0, 1.0);
  }
  rec.aiming_values.push_back(aim);
  double pl = nan;
  if (obj.f_star()) {
    const double pgap = obj.eval(probe) - fs;
    if (pgap > 1e-14) pl = ng * ng / (2.0 * pgap);
  }
  rec.pl_values.push_back(pl);
  if (!std::isfinite(gap) || gap > 1e12 || !x.allFinite() || x.norm() > 1e6) {
    rec.diverged = true;
    return false;
  }
  return true;
}

}  // namespace detail

/// Stochastic gradient satisfying the strong growth condition with constant rho.
inline Point sgc_oracle(const Objective& obj, const Point& x, const NoiseModel& noise, std::mt19937_64& rng) {
  noise.validate();
  Point g = obj.grad(x);
  if (noise.kind == NoiseKind::none) return g;
  const double delta = std::sqrt(noise.rho - 1.0);
  const double s = (rng() >> 63) ? 1.0 + delta : 1.0 - delta;
  return s * g;
}

inline void check_start(const Objective& obj, const Point& x0) {
  require_point(x0, "start point");
  if (x0.size() != obj.dim()) throw InvalidInputError("start point dimension mismatch");
  if (!obj.domain().contains(x0)) throw DomainError("start point outside the domain");
}

/// x_{k+1} = x_k - gamma * g(x_k).
inline RunRecord run_gd(const Objective& obj, const GdConfig& cfg, const Point& x0,
                        const NoiseModel& noise = NoiseModel::exact()) {
  if (!(cfg.gamma > 0.0)) throw InvalidParamError("run_gd: gamma must be positive");
  if (cfg.iters < 0) throw InvalidParamError("run_gd: iters must be >= 0");
  noise.validate();
  check_start(obj, x0);
  std::mt19937_64 rng(cfg.seed.value_or(0));
  RunRecord rec;
  Point x = x0;
  for (int k = 0;; ++k) {
    const Point g = obj.grad(x);
    if (!detail::record_step(rec, obj, x, x, g, k) || k == cfg.iters) break;
    const Point step = noise.kind == NoiseKind::none ? g : sgc_oracle(obj, x, noise, rng);
    x = x - cfg.gamma * step;
  }
  return rec;
}

/// x_{k+1} = x_k + alpha (x_k - x_{k-1}) - eta g(x_k), with x_{-1} = x_0.
inline RunRecord run_hb(const Objective& obj, const HbConfig& cfg, const Point& x0) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw InvalidParamError("run_hb: alpha must lie in [0, 1)");
  if (!(cfg.eta > 0.0)) throw InvalidParamError("run_hb: eta must be positive");
  if (cfg.iters < 0) throw InvalidParamError("run_hb: iters must be >= 0");
  check_start(obj, x0);
  RunRecord rec;
  Point x = x0;
  Point prev = x0;
  for (int k = 0;; ++k) {
    const Point g = obj.grad(x);
    if (!detail::record_step(rec, obj, x, x, g, k) || k == cfg.iters) break;
    Point next = cfg.alpha == 0.0 ? Point(x - cfg.eta * g) : Point(x + cfg.alpha * (x - prev) - cfg.eta * g);
    prev = std::move(x);
    x = std::move(next);
  }
  return rec;
}

/// y_k = x_k + alpha (x_k - x_{k-1}); x_{k+1} = y_k - gamma g(y_k), with x_{-1} = x_0.
inline RunRecord run_nm_prime(const Objective& obj, const NmPrimeConfig& cfg, const Point& x0) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw InvalidParamError("run_nm_prime: alpha must lie in [0, 1)");
  if (!(cfg.gamma > 0.0)) throw InvalidParamError("run_nm_prime: gamma must be positive");
  if (cfg.iters < 0) throw InvalidParamError("run_nm_prime: iters must be >= 0");
  check_start(obj, x0);
  RunRecord rec;
  Point x = x0;
  Point prev = x0;
  for (int k = 0;; ++k) {
    const Point y = cfg.alpha == 0.0 ? x : Point(x + cfg.alpha * (x - prev));
    const Point g = obj.grad(y);
    if (!detail::record_step(rec, obj, x, y, g, k) || k == cfg.iters) break;
    prev = std::move(x);
    x = y - cfg.gamma * g;
  }
  return rec;
}

/// Momentum coefficients for an inter-event gap g.
struct ContinuizedCoefficients {
  double alpha;
  double beta;
};

inline ContinuizedCoefficients continuized_coefficients(double eta, double eta_prime, double gap) {
  const double s = eta + eta_prime;
  const double e = std::exp(-s * gap);
  const double alpha = eta / s * (1.0 - e);
  const double denom = eta_prime + eta * e;
  const double beta = denom > 0.0 ? eta_prime * (1.0 - e) / denom : 0.0;
  return {alpha, beta};
}

/// Three-sequence Nesterov method with exponential inter-event gaps:
/// y = x + alpha_k (z - x); x+ = y - gamma g(y); z+ = z + beta_k (y - z) - gamma' g(y).
inline RunRecord run_nm_continuized(const Objective& obj, const NmContinuizedConfig& cfg, const Point& x0,
                                    const NoiseModel& noise = NoiseModel::exact()) {
  if (!(cfg.eta + cfg.eta_prime > 0.0) || cfg.eta < 0.0 || cfg.eta_prime < 0.0)
    throw InvalidParamError("run_nm_continuized: need eta, eta' >= 0 with positive sum");
  if (!(cfg.gamma >= 0.0 && cfg.gamma_prime >= 0.0))
    throw InvalidParamError("run_nm_continuized: gamma and gamma' must be >= 0");
  if (cfg.iters < 0) throw InvalidParamError("run_nm_continuized: iters must be >= 0");
  noise.validate();
  check_start(obj, x0);
  std::mt19937_64 gaps(cfg.seed);
  std::mt19937_64 noise_rng(cfg.seed ^ 0xd1b54a32d192ed03ULL);
  RunRecord rec;
  Point x = x0;
  Point z = x0;
  double time = 0.0;
  for (int k = 0;; ++k) {
    const double gap = detail::exp1(gaps);
    const auto [alpha, beta] = continuized_coefficients(cfg.eta, cfg.eta_prime, gap);
    const Point y = x + alpha * (z - x);
    const Point g = noise.kind == NoiseKind::none ? obj.grad(y) : sgc_oracle(obj, y, noise, noise_rng);
    if (!detail::record_step(rec, obj, x, y, g, time) || k == cfg.iters) break;
    x = y - cfg.gamma * g;
    z = z + beta * (y - z) - cfg.gamma_prime * g;
    time += gap;
  }
  return rec;
}

/// Parameters of the accelerated rate under PL, aiming and quadratic growth (noise level rho).
inline NmContinuizedConfig theorem_params_nm(double mu, double mu0, double L0, double L, double a, double rho = 1.0,
                                             int iters = 0, std::uint64_t seed = 0) {
  if (!(mu > 0.0 && mu <= mu0 && mu0 <= L0 && L0 <= L))
    throw InvalidParamError("theorem_params_nm: need 0 < mu <= mu0 <= L0 <= L");
  if (!(a > 0.0 && a <= 1.0)) throw InvalidParamError("theorem_params_nm: need 0 < a <= 1");
  if (!(rho >= 1.0)) throw InvalidParamError("theorem_params_nm: rho must be >= 1");
  const double prod = std::pow(mu0 * L0, 0.25);
  NmContinuizedConfig c;
  c.eta = prod / std::sqrt(L) / rho;
  c.eta_prime = a / rho * std::pow(mu0 / L0, 0.25) * std::sqrt(mu / L);
  c.gamma = 1.0 / (rho * L);
  c.gamma_prime = 1.0 / (rho * prod * std::sqrt(L));
  c.iters = iters;
  c.seed = seed;
  return c;
}

/// Ranking used by the grid searches: runs that reach `floor_rel * f_gap[0]` rank by the
/// first iteration doing so; the rest rank after them by the gap at `at_iter`.
struct TuningScore {
  bool reached = false;
  long long hit = 0;
  double final_gap = std::numeric_limits<double>::infinity();

  bool operator<(const TuningScore& o) const {
    if (reached != o.reached) return reached;
    if (reached) return hit < o.hit;
    return final_gap < o.final_gap;
  }
};

inline TuningScore score_run(const RunRecord& rec, std::size_t at_iter, double floor_rel = 1e-13) {
  TuningScore s;
  if (rec.diverged || rec.size() <= at_iter) return s;
  const double floor = floor_rel * rec.f_gaps.front();
  for (std::size_t k = 0; k <= at_iter; ++k)
    if (rec.f_gaps[k] <= floor) {
      s.reached = true;
      s.hit = static_cast<long long>(k);
      return s;
    }
  s.final_gap = rec.f_gaps[at_iter];
  if (!std::isfinite(s.final_gap)) s.final_gap = std::numeric_limits<double>::infinity();
  return s;
}

/// `n` log-spaced values between lo and hi inclusive.
inline std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = std::pow(10.0, n == 1 ? a : a + (b - a) * i / (n - 1));
  return v;
}

template <class Cfg>
struct TuningResult {
  Cfg best;
  TuningScore score;
  RunRecord record;
  std::size_t evaluated = 0;
};

namespace detail {

template <class Cfg, class Run>
TuningResult<Cfg> grid_search(const std::vector<Cfg>& cells, Run&& run, std::size_t at_iter) {
  if (cells.empty()) throw InvalidParamError("grid search: empty grid");
  std::vector<TuningScore> scores(cells.size());
  parallel_for(cells.size(), [&](std::size_t i) { scores[i] = score_run(run(cells[i]), at_iter); });
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (scores[i] < scores[best]) best = i;
  return TuningResult<Cfg>{cells[best], scores[best], run(cells[best]), cells.size()};
}

}  // namespace detail

inline TuningResult<GdConfig> tune_gd(const Objective& obj, const Point& x0, const std::vector<double>& gammas,
                                      int iters) {
  std::vector<GdConfig> cells;
  for (double g : gammas) cells.push_back(GdConfig{g, iters, std::nullopt});
  return detail::grid_search(cells, [&](const GdConfig& c) { return run_gd(obj, c, x0); },
                             static_cast<std::size_t>(iters));
}

inline TuningResult<NmPrimeConfig> tune_nm_prime(const Objective& obj, const Point& x0,
                                                 const std::vector<double>& gammas,
                                                 const std::vector<double>& alphas, int iters) {
  std::vector<NmPrimeConfig> cells;
  for (double g : gammas)
    for (double a : alphas) cells.push_back(NmPrimeConfig{a, g, iters});
  return detail::grid_search(cells, [&](const NmPrimeConfig& c) { return run_nm_prime(obj, c, x0); },
                             static_cast<std::size_t>(iters));
}

struct NmGrid {
  std::vector<double> eta, eta_prime, gamma, gamma_prime;
};

inline TuningResult<NmContinuizedConfig> tune_nm(const Objective& obj, const Point& x0, const NmGrid& grid, int iters,
                                                 std::uint64_t seed) {
  std::vector<NmContinuizedConfig> cells;
  for (double e : grid.eta)
    for (double ep : grid.eta_prime)
      for (double g : grid.gamma)
        for (double gp : grid.gamma_prime) cells.push_back(NmContinuizedConfig{e, ep, g, gp, iters, seed});
  return detail::grid_search(cells, [&](const NmContinuizedConfig& c) { return run_nm_continuized(obj, c, x0); },
                             static_cast<std::size_t>(iters));
}

namespace detail {

inline void put_number(std::ostream& os, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  os << buf;
}

}  // namespace detail

/// CSV with columns k, time, f_gap, grad_norm, aiming, pl_pointwise.
inline void write_run_csv(std::ostream& os, const RunRecord& rec) {
  os << "k,time,f_gap,grad_norm,aiming,pl_pointwise\n";
  for (std::size_t k = 0; k < rec.size(); ++k) {
    os << k << ',';
    detail::put_number(os, rec.times[k]);
    os << ',';
    detail::put_number(os, rec.f_gaps[k]);
    os << ',';
    detail::put_number(os, rec.grad_norms[k]);
    os << ',';
    detail::put_number(os, rec.aiming_values[k]);
    os << ',';
    detail::put_number(os, rec.pl_values[k]);
    os << '\n';
  }
}

}  // namespace plaim

#endif  // PLAIM_OPTIM_HPP
