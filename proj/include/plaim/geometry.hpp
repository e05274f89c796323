// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_GEOMETRY_HPP
#define PLAIM_GEOMETRY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "plaim/objective.hpp"
#include "plaim/parallel.hpp"

namespace plaim {

/// Evaluation points for the constant estimators. Dimensions up to 3 use a tensor grid with
/// `resolution_per_axis` points per axis (endpoints included). Higher dimensions, or any
/// dimension with `samples > 0`, use that many uniform random points drawn from `seed`.
struct GridSpec {
  int resolution_per_axis = 1000;
  std::optional<Box> domain;
  std::optional<double> exclusion_radius;
  int samples = 0;
  std::uint64_t seed = 0;
};

struct GeometryEstimate {
  double mu_pl = 0.0;
  double L_smooth = 0.0;
  double mu0_qg = 0.0;
  double L0_qg = 0.0;
  double a_aim = 0.0;
  std::map<std::string, Point> witnesses;
  long long grid_points = 0;
  int grid_resolution = 0;
};

struct SqcSweep {
  std::vector<double> taus;
  std::vector<double> mus;
};

enum class FunctionClass { SC, SQC, PL, PL_AC };
enum class Algorithm { GF, NMO, GD, NM };

struct RateEntry {
  FunctionClass function_class;
  Algorithm algorithm;
  double rate = 0.0;
  bool defined = false;
};

inline const char* to_string(FunctionClass c) {
  switch (c) {
    case FunctionClass::SC: return "SC";
    case FunctionClass::SQC: return "SQC";
    case FunctionClass::PL: return "PL";
    case FunctionClass::PL_AC: return "PL+AC";
  }
  return "?";
}

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::GF: return "GF";
    case Algorithm::NMO: return "NMO";
    case Algorithm::GD: return "GD";
    case Algorithm::NM: return "NM";
  }
  return "?";
}

/// ||grad f||^2 / (2 (f - f*)).
inline double pointwise_pl(const Objective& obj, const Point& x) {
  const double gap = obj.eval(x) - obj.require_f_star();
  if (!(gap > 1e-14)) throw NearOptimumError("pointwise_pl: f(x) too close to f*");
  const Point g = obj.grad(x);
  return g.squaredNorm() / (2.0 * gap);
}

/// Cosine between grad f(x) and x - x*.
inline double pointwise_aiming(const Objective& obj, const Point& x) {
  const Point r = x - obj.require_x_star();
  const Point g = obj.grad(x);
  const double nr = r.norm();
  const double ng = g.norm();
  if (nr == 0.0 || ng == 0.0) throw DegeneratePointError("pointwise_aiming: x = x* or zero gradient");
  return std::clamp(g.dot(r) / (ng * nr), -1.0, 1.0);
}

/// 2 (f - f*) / ||x - x*||^2.
inline double pointwise_qg(const Objective& obj, const Point& x) {
  const Point r = x - obj.require_x_star();
  const double d2 = r.squaredNorm();
  if (d2 == 0.0) throw DegeneratePointError("pointwise_qg: x = x*");
  return 2.0 * (obj.eval(x) - obj.require_f_star()) / d2;
}

namespace detail {

struct GridLayout {
  Box box;
  int dim = 1;
  int per_axis = 0;
  long long count = 0;
  bool random = false;
  std::vector<Point> sampled;

  Point point(long long idx) const {
    if (random) return sampled[static_cast<std::size_t>(idx)];
    Point x(dim);
    for (int k = 0; k < dim; ++k) {
      const long long j = idx % per_axis;
      idx /= per_axis;
      const double frac = per_axis == 1 ? 0.5 : static_cast<double>(j) / (per_axis - 1);
      x[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * frac;
    }
    return x;
  }
};

inline GridLayout make_layout(const Objective& obj, const GridSpec& grid) {
  GridLayout g;
  g.box = grid.domain ? *grid.domain : obj.domain();
  g.dim = obj.dim();
  if (g.box.dim() != g.dim) throw InvalidParamError("grid domain dimension mismatch");
  if (grid.resolution_per_axis < 1) throw InvalidParamError("grid resolution must be positive");
  g.per_axis = grid.resolution_per_axis;
  const int samples = grid.samples > 0 ? grid.samples : (g.dim >= 4 ? 1000 : 0);
  if (samples > 0) {
    g.random = true;
    g.count = samples;
    std::mt19937_64 rng(grid.seed);
    g.sampled.reserve(static_cast<std::size_t>(samples));
    for (int s = 0; s < samples; ++s) g.sampled.push_back(g.box.sample(rng));
    return g;
  }
  double total = std::pow(static_cast<double>(g.per_axis), g.dim);
  if (total > 1e8) throw InvalidParamError("grid exceeds 1e8 points");
  g.count = static_cast<long long>(std::llround(total));
  return g;
}

inline double exclusion_radius(const GridSpec& grid, const GridLayout& layout) {
  if (grid.exclusion_radius) {
    if (*grid.exclusion_radius < 0.0) throw InvalidParamError("exclusion radius must be >= 0");
    return *grid.exclusion_radius;
  }
  return 2.0 * layout.box.diameter() / layout.per_axis;
}

/// Largest |eigenvalue| of the local Hessian: |f''| in 1-D, FD Hessian eigenvalues for d <= 3,
/// power iteration beyond.
inline double local_curvature(const Objective& obj, const Point& x, std::mt19937_64& rng) {
  const int d = obj.dim();
  const double h = 1e-4 * (1.0 + x.norm());
  if (d == 1) return std::abs(hessian_vec_unchecked(obj, x, Point::Ones(1), h)[0]);
  if (d <= 3) {
    Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
    for (int i = 0; i < d; ++i) {
      Point e = Point::Zero(d);
      e[i] = 1.0;
      const Point col = hessian_vec_unchecked(obj, x, e, h);
      for (int j = 0; j < d; ++j) H(j, i) = col[j];
    }
    if (d == 2) {
      const double a = H(0, 0), c = H(1, 1), b = 0.5 * (H(0, 1) + H(1, 0));
      const double mid = 0.5 * (a + c);
      const double rad = std::hypot(0.5 * (a - c), b);
      return std::max(std::abs(mid + rad), std::abs(mid - rad));
    }
    const Eigen::Matrix3d S = 0.5 * (H + H.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es;
    es.computeDirect(S, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  return curvature_power(obj, x, 50, rng, h);
}

struct Extremum {
  double value = 0.0;
  long long index = -1;
  void take_min(double v, long long i) {
    if (index < 0 || v < value) {
      value = v;
      index = i;
    }
  }
  void take_max(double v, long long i) {
    if (index < 0 || v > value) {
      value = v;
      index = i;
    }
  }
};

struct ScanResult {
  Extremum pl, curv, qg_min, qg_max, aim;
};

}  // namespace detail

/// Grid extrema of the pointwise PL, curvature, quadratic-growth and aiming values.
inline GeometryEstimate estimate_constants(const Objective& obj, const GridSpec& grid) {
  const Point& xs = obj.require_x_star();
  const double fs = obj.require_f_star();
  const detail::GridLayout layout = detail::make_layout(obj, grid);
  const double excl = detail::exclusion_radius(grid, layout);
  const unsigned workers = worker_count();
  std::vector<detail::ScanResult> partial(workers);

  parallel_chunks(static_cast<std::size_t>(layout.count), workers,
                  [&](unsigned w, std::size_t begin, std::size_t end) {
                    detail::ScanResult res;
                    std::mt19937_64 rng(grid.seed ^ (0x9e3779b97f4a7c15ULL * (w + 1)));
                    for (std::size_t i = begin; i < end; ++i) {
                      const long long idx = static_cast<long long>(i);
                      const Point x = layout.point(idx);
                      // Power iteration needs a stream that depends only on the point index.
                      if (obj.dim() >= 4) rng.seed(grid.seed + 0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(idx + 1));
                      res.curv.take_max(detail::local_curvature(obj, x, rng), idx);
                      const Point r = x - xs;
                      const double dist = r.norm();
                      if (dist <= excl) continue;
                      const double gap = obj.eval(x) - fs;
                      const Point g = obj.grad(x);
                      const double qg = 2.0 * gap / (dist * dist);
                      res.qg_min.take_min(qg, idx);
                      res.qg_max.take_max(qg, idx);
                      if (gap > 1e-14) res.pl.take_min(g.squaredNorm() / (2.0 * gap), idx);
                      const double ng = g.norm();
                      if (ng > 0.0) res.aim.take_min(std::clamp(g.dot(r) / (ng * dist), -1.0, 1.0), idx);
                    }
                    partial[w] = res;
                  });

  detail::ScanResult all;
  for (const auto& p : partial) {
    if (p.pl.index >= 0) all.pl.take_min(p.pl.value, p.pl.index);
    if (p.curv.index >= 0) all.curv.take_max(p.curv.value, p.curv.index);
    if (p.qg_min.index >= 0) all.qg_min.take_min(p.qg_min.value, p.qg_min.index);
    if (p.qg_max.index >= 0) all.qg_max.take_max(p.qg_max.value, p.qg_max.index);
    if (p.aim.index >= 0) all.aim.take_min(p.aim.value, p.aim.index);
  }
  if (all.pl.index < 0 || all.qg_min.index < 0 || all.aim.index < 0 || all.curv.index < 0)
    throw EstimationError("estimate_constants: no valid grid point outside the exclusion radius");

  GeometryEstimate est;
  est.mu_pl = all.pl.value;
  est.L_smooth = all.curv.value;
  est.mu0_qg = all.qg_min.value;
  est.L0_qg = all.qg_max.value;
  est.a_aim = all.aim.value;
  est.witnesses["mu_pl"] = layout.point(all.pl.index);
  est.witnesses["L_smooth"] = layout.point(all.curv.index);
  est.witnesses["mu0_qg"] = layout.point(all.qg_min.index);
  est.witnesses["L0_qg"] = layout.point(all.qg_max.index);
  est.witnesses["a_aim"] = layout.point(all.aim.index);
  est.grid_points = layout.count;
  est.grid_resolution = layout.random ? 0 : layout.per_axis;
  return est;
}

/// `n` equally spaced values in [lo, hi].
inline std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  return v;
}

/// For each tau, the grid minimum of 2((1/tau) <grad f, x - x*> - (f - f*)) / ||x - x*||^2.
inline SqcSweep sqc_sweep(const Objective& obj, const GridSpec& grid, const std::vector<double>& taus) {
  for (std::size_t j = 0; j < taus.size(); ++j) {
    if (!(taus[j] > 0.0 && taus[j] <= 1.0)) throw InvalidParamError("sqc_sweep: taus must lie in (0, 1]");
    if (j > 0 && !(taus[j] > taus[j - 1])) throw InvalidParamError("sqc_sweep: taus must be increasing");
  }
  const Point& xs = obj.require_x_star();
  const double fs = obj.require_f_star();
  const detail::GridLayout layout = detail::make_layout(obj, grid);
  const double excl = detail::exclusion_radius(grid, layout);

  // Per point: slope = 2<g, r>/|r|^2 and offset = 2 gap/|r|^2, so mu(tau) = min(slope/tau - offset).
  const std::size_t n = static_cast<std::size_t>(layout.count);
  std::vector<double> slope(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<double> offset(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const Point x = layout.point(static_cast<long long>(i));
    const Point r = x - xs;
    const double d2 = r.squaredNorm();
    if (std::sqrt(d2) <= excl) return;
    slope[i] = 2.0 * obj.grad(x).dot(r) / d2;
    offset[i] = 2.0 * (obj.eval(x) - fs) / d2;
  });
  std::vector<double> s, o;
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isnan(slope[i])) {
      s.push_back(slope[i]);
      o.push_back(offset[i]);
    }
  if (s.empty()) throw EstimationError("sqc_sweep: no valid grid point outside the exclusion radius");

  SqcSweep out;
  out.taus = taus;
  out.mus.assign(taus.size(), 0.0);
  parallel_for(taus.size(), [&](std::size_t j) {
    const double inv = 1.0 / taus[j];
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < s.size(); ++i) m = std::min(m, s[i] * inv - o[i]);
    out.mus[j] = m;
  });
  return out;
}

/// Smallest tau at which the grid SQC modulus becomes nonpositive: min over points of
/// <grad f, x - x*> / (f - f*). Values above 1 mean every tau in (0, 1] is admissible.
inline double sqc_admissibility_cutoff(const Objective& obj, const GridSpec& grid) {
  const Point& xs = obj.require_x_star();
  const double fs = obj.require_f_star();
  const detail::GridLayout layout = detail::make_layout(obj, grid);
  const double excl = detail::exclusion_radius(grid, layout);
  const unsigned workers = worker_count();
  std::vector<double> part(workers, std::numeric_limits<double>::infinity());
  parallel_chunks(static_cast<std::size_t>(layout.count), workers, [&](unsigned w, std::size_t begin, std::size_t end) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = begin; i < end; ++i) {
      const Point x = layout.point(static_cast<long long>(i));
      const Point r = x - xs;
      if (r.norm() <= excl) continue;
      const double gap = obj.eval(x) - fs;
      if (gap > 0.0) m = std::min(m, obj.grad(x).dot(r) / gap);
    }
    part[w] = m;
  });
  const double cut = *std::min_element(part.begin(), part.end());
  if (!std::isfinite(cut)) throw EstimationError("sqc_admissibility_cutoff: no valid grid point");
  return cut;
}

/// Constants feeding the rate table. Unset entries raise MissingConstantError when a requested
/// cell needs them. `sc_mu` is a strong-convexity modulus; `nmo_gamma` enables the PL row of NMO
/// under gamma = (eta + eta') / mu.
struct RateConstants {
  std::optional<double> mu, L, mu0, L0, a, sc_mu, nmo_gamma;
  std::optional<SqcSweep> sweep;

  static RateConstants from(const GeometryEstimate& e) {
    RateConstants c;
    c.mu = e.mu_pl;
    c.L = e.L_smooth;
    c.mu0 = e.mu0_qg;
    c.L0 = e.L0_qg;
    c.a = e.a_aim;
    return c;
  }
};

namespace detail {

inline double need(const std::optional<double>& v, const char* name) {
  if (!v) throw MissingConstantError(std::string("rate_table: missing constant ") + name);
  return *v;
}

/// Cell formula with the strong-convexity-type modulus m.
inline double base_rate(Algorithm alg, double m, const RateConstants& c) {
  switch (alg) {
    case Algorithm::GF: return m;
    case Algorithm::NMO: return std::sqrt(m);
    case Algorithm::GD: return m / need(c.L, "L");
    case Algorithm::NM: return std::sqrt(m / need(c.L, "L"));
  }
  return 0.0;
}

}  // namespace detail

/// Best SQC cell over the sweep: (index, rate). Index is -1 when no tau is admissible.
inline std::pair<int, double> sqc_best(const SqcSweep& sweep, Algorithm alg, const RateConstants& c) {
  int best = -1;
  double rate = 0.0;
  for (std::size_t j = 0; j < sweep.taus.size(); ++j) {
    if (!(sweep.mus[j] > 0.0)) continue;
    const double r = sweep.taus[j] * detail::base_rate(alg, sweep.mus[j], c);
    if (best < 0 || r > rate) {
      best = static_cast<int>(j);
      rate = r;
    }
  }
  return {best, rate};
}

inline RateEntry rate_entry(FunctionClass cls, Algorithm alg, const RateConstants& c) {
  RateEntry e{cls, alg, 0.0, true};
  switch (cls) {
    case FunctionClass::SC:
      e.rate = detail::base_rate(alg, detail::need(c.sc_mu, "sc_mu"), c);
      break;
    case FunctionClass::SQC: {
      if (!c.sweep) throw MissingConstantError("rate_table: missing SQC sweep");
      const auto [idx, r] = sqc_best(*c.sweep, alg, c);
      e.defined = idx >= 0;
      e.rate = r;
      break;
    }
    case FunctionClass::PL: {
      const double mu = detail::need(c.mu, "mu");
      if (alg == Algorithm::NMO) {
        e.defined = c.nmo_gamma.has_value();
        e.rate = e.defined ? 2.0 * mu * *c.nmo_gamma : 0.0;
      } else if (alg == Algorithm::NM) {
        e.rate = mu / detail::need(c.L, "L");
      } else {
        e.rate = detail::base_rate(alg, mu, c);
      }
      break;
    }
    case FunctionClass::PL_AC: {
      const double mu = detail::need(c.mu, "mu");
      const double mu0 = detail::need(c.mu0, "mu0");
      const double L0 = detail::need(c.L0, "L0");
      const double a = detail::need(c.a, "a");
      switch (alg) {
        case Algorithm::GF: e.rate = a * std::sqrt(mu * mu0); break;
        case Algorithm::NMO: e.rate = a * std::pow(mu0 / L0, 0.25) * std::sqrt(mu); break;
        case Algorithm::GD: e.rate = a * std::sqrt(mu * mu0) / detail::need(c.L, "L"); break;
        case Algorithm::NM: e.rate = a * std::pow(mu0 / L0, 0.25) * std::sqrt(mu / detail::need(c.L, "L")); break;
      }
      break;
    }
  }
  if (e.defined && !(e.rate > 0.0)) e.defined = false;
  return e;
}

inline std::vector<RateEntry> rate_table(const RateConstants& c,
                                         const std::vector<std::pair<FunctionClass, Algorithm>>& which) {
  std::vector<RateEntry> out;
  out.reserve(which.size());
  for (const auto& [cls, alg] : which) out.push_back(rate_entry(cls, alg, c));
  return out;
}

enum class AccelerationMode { discrete, continuous };

struct AccelerationVerdict {
  double threshold = 0.0;
  bool accelerates = false;
  std::optional<bool> flatness_ok;
};

/// Minimal aiming value for the momentum rate to beat the plain-gradient rate.
inline AccelerationVerdict acceleration_predicate(const GeometryEstimate& est, AccelerationMode mode) {
  AccelerationVerdict v;
  const double ratio = std::pow(est.L0_qg / est.mu0_qg, 0.25);
  if (mode == AccelerationMode::discrete) {
    v.threshold = ratio * std::sqrt(est.mu_pl / est.L_smooth);
  } else {
    v.threshold = ratio * std::sqrt(est.mu_pl);
    v.flatness_ok = est.mu0_qg * est.L0_qg < 1.0;
  }
  v.accelerates = est.a_aim >= v.threshold * (1.0 - 1e-12);
  return v;
}

struct SqcParams {
  double tau;
  double mu_sqc;
};

/// Strong quasar-convexity parameters implied by PL + aiming + quadratic growth.
inline SqcParams sqc_from_pl_ac(double mu, double mu0, double L0, double a) {
  if (!(mu > 0.0 && mu0 > 0.0 && L0 > 0.0 && a > 0.0 && a <= 1.0))
    throw InvalidParamError("sqc_from_pl_ac: need positive inputs and a <= 1");
  return {std::min(1.0, a * std::sqrt(mu / L0)), std::sqrt(L0 * mu0)};
}

/// SQC modulus mu a / tau - L / 2 for tau below 2 mu a / L.
inline double sqc_from_uaac(double mu, double L, double a, double tau) {
  if (!(mu > 0.0 && L > 0.0 && a > 0.0)) throw InvalidParamError("sqc_from_uaac: need positive mu, L, a");
  if (!(tau > 0.0 && tau < 2.0 * mu * a / L)) throw InvalidParamError("sqc_from_uaac: tau out of range");
  return mu * a / tau - L / 2.0;
}

/// Aiming constant implied by a restricted secant inequality with modulus nu.
inline double rsi_to_ac(double nu, double L) {
  if (!(nu > 0.0) || !(L > 0.0) || nu > L) throw InvalidParamError("rsi_to_ac: need 0 < nu <= L");
  return nu / L;
}

/// JSON records {constant, value, witness, grid_resolution}.
inline nlohmann::json estimate_to_json(const GeometryEstimate& est) {
  nlohmann::json out = nlohmann::json::array();
  const std::pair<const char*, double> rows[] = {{"mu_pl", est.mu_pl},
                                                 {"L_smooth", est.L_smooth},
                                                 {"mu0_qg", est.mu0_qg},
                                                 {"L0_qg", est.L0_qg},
                                                 {"a_aim", est.a_aim}};
  for (const auto& [name, value] : rows) {
    nlohmann::json w = nlohmann::json::array();
    const auto it = est.witnesses.find(name);
    if (it != est.witnesses.end())
      for (Eigen::Index i = 0; i < it->second.size(); ++i) w.push_back(it->second[i]);
    out.push_back({{"constant", name}, {"value", value}, {"witness", w}, {"grid_resolution", est.grid_resolution}});
  }
  return out;
}

}  // namespace plaim

#endif  // PLAIM_GEOMETRY_HPP
