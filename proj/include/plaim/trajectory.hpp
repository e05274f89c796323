// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_TRAJECTORY_HPP
#define PLAIM_TRAJECTORY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "plaim/flow.hpp"
#include "plaim/geometry.hpp"
#include "plaim/optim.hpp"
#include "plaim/parallel.hpp"

namespace plaim {

struct RateFit {
  double rate = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<std::size_t, std::size_t> window;  ///< [start, end)
};

enum class FitAxis { time, index };

/// Least-squares line through (axis, log gap) on [start, end); rate = -slope.
inline RateFit fit_rate(const std::vector<double>& axis, const std::vector<double>& gaps,
                        std::pair<std::size_t, std::size_t> window) {
  const auto [start, end] = window;
  if (end > gaps.size() || end > axis.size() || start >= end) throw FitError("fit_rate: window outside the record");
  if (end - start < 10) throw FitError("fit_rate: window shorter than 10 points");
  double sx = 0, sy = 0;
  const double n = static_cast<double>(end - start);
  for (std::size_t i = start; i < end; ++i) {
    if (!(gaps[i] > 0.0) || !std::isfinite(gaps[i])) throw FitError("fit_rate: nonpositive gap in window");
    sx += axis[i];
    sy += std::log(gaps[i]);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = start; i < end; ++i) {
    const double dx = axis[i] - mx, dy = std::log(gaps[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw FitError("fit_rate: degenerate time axis");
  const double slope = sxy / sxx;
  RateFit fit;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.window = window;
  return fit;
}

inline std::pair<std::size_t, std::size_t> default_window(std::size_t n) { return {n / 10, n}; }

inline RateFit fit_rate(const RunRecord& rec, std::optional<std::pair<std::size_t, std::size_t>> window = {},
                        FitAxis axis = FitAxis::time) {
  std::vector<double> ax = rec.times;
  if (axis == FitAxis::index)
    for (std::size_t i = 0; i < ax.size(); ++i) ax[i] = static_cast<double>(i);
  return fit_rate(ax, rec.f_gaps, window.value_or(default_window(rec.size())));
}

inline RateFit fit_rate(const FlowRecord& rec, std::optional<std::pair<std::size_t, std::size_t>> window = {}) {
  return fit_rate(rec.times, rec.f_gaps, window.value_or(default_window(rec.size())));
}

enum class EnvelopeKind { continuous, discrete };

/// K e^{-rate t} (continuous) or K (1 - rate)^k (discrete).
struct EnvelopeBound {
  double K = 0.0;
  double rate = 0.0;
  EnvelopeKind kind = EnvelopeKind::continuous;
  std::string source;

  double at(double t) const {
    return kind == EnvelopeKind::continuous ? K * std::exp(-rate * t) : K * std::pow(1.0 - rate, t);
  }
};

/// Builds a theorem envelope. Sources and the inputs they read:
///   gf_pl       gradient flow under PL:            K = gap, rate 2 mu
///   gf_pl_ac    gradient flow under PL + aiming:   K = (1 + sqrt(L0/mu0)) gap, rate a sqrt(mu mu0)
///   gd_pl       GD under PL (discrete):            K = gap, rate mu / L
///   gd_pl_ac    GD under PL + aiming (discrete):   K = (1 + sqrt(L0/mu0)) gap, rate a sqrt(mu mu0) / L
///   nmo_pl_ac   momentum flow:                     K = (1 + sqrt(L0/mu0)) gap, rate a (mu0/L0)^{1/4} sqrt(mu)
///   nm_pl_ac    continuized NM, per iteration:     K = c0 (1 + sqrt(L0/mu0)) gap,
///                                                  rate a (mu0/L0)^{1/4} sqrt(mu/L) (1 - c1)
///   gf_sqc      gradient flow under SQC:           K = gap + (mu/2) dist0_sq, rate tau mu
///   nmo_pl      momentum flow, gamma = (eta+eta')/mu: K = gap, rate 2 mu gamma
///   gf_avg, nmo_avg   as gf_pl_ac / nmo_pl_ac with extras["a_avg"] in place of a.
/// Extras: c0 (default 2), c1 (default 0.5), tau, dist0_sq, gamma, a_avg.
inline EnvelopeBound make_envelope(const std::string& source, const RateConstants& c, double x0_gap,
                                   const std::map<std::string, double>& extras = {}) {
  if (!(x0_gap >= 0.0)) throw InvalidParamError("make_envelope: initial gap must be >= 0");
  auto extra = [&](const char* key) {
    const auto it = extras.find(key);
    if (it == extras.end()) throw MissingConstantError(std::string("make_envelope: missing extra ") + key);
    return it->second;
  };
  auto extra_or = [&](const char* key, double fallback) {
    const auto it = extras.find(key);
    return it == extras.end() ? fallback : it->second;
  };
  using detail::need;
  auto growth = [&] { return 1.0 + std::sqrt(need(c.L0, "L0") / need(c.mu0, "mu0")); };
  EnvelopeBound e;
  e.source = source;
  if (source == "gf_pl") {
    e.K = x0_gap;
    e.rate = 2.0 * need(c.mu, "mu");
  } else if (source == "gf_pl_ac" || source == "gf_avg") {
    const double a = source == "gf_avg" ? extra("a_avg") : need(c.a, "a");
    e.K = growth() * x0_gap;
    e.rate = a * std::sqrt(need(c.mu, "mu") * need(c.mu0, "mu0"));
  } else if (source == "gd_pl") {
    e.K = x0_gap;
    e.rate = need(c.mu, "mu") / need(c.L, "L");
    e.kind = EnvelopeKind::discrete;
  } else if (source == "gd_pl_ac") {
    e.K = growth() * x0_gap;
    e.rate = need(c.a, "a") * std::sqrt(need(c.mu, "mu") * need(c.mu0, "mu0")) / need(c.L, "L");
    e.kind = EnvelopeKind::discrete;
  } else if (source == "nmo_pl_ac" || source == "nmo_avg") {
    const double a = source == "nmo_avg" ? extra("a_avg") : need(c.a, "a");
    e.K = growth() * x0_gap;
    e.rate = a * std::pow(need(c.mu0, "mu0") / need(c.L0, "L0"), 0.25) * std::sqrt(need(c.mu, "mu"));
  } else if (source == "nm_pl_ac") {
    const double c0 = extra_or("c0", 2.0), c1 = extra_or("c1", 0.5);
    e.K = c0 * growth() * x0_gap;
    e.rate = need(c.a, "a") * std::pow(need(c.mu0, "mu0") / need(c.L0, "L0"), 0.25) *
             std::sqrt(need(c.mu, "mu") / need(c.L, "L")) * (1.0 - c1);
  } else if (source == "gf_sqc") {
    const double mu = need(c.mu, "mu");
    e.K = x0_gap + 0.5 * mu * extra("dist0_sq");
    e.rate = extra("tau") * mu;
  } else if (source == "nmo_pl") {
    e.K = x0_gap;
    e.rate = 2.0 * need(c.mu, "mu") * extra("gamma");
  } else {
    throw InvalidParamError("make_envelope: unknown source '" + source + "'");
  }
  if (!(e.rate > 0.0) || (e.kind == EnvelopeKind::discrete && !(e.rate < 1.0)))
    throw InvalidParamError("make_envelope: rate out of range for " + source);
  return e;
}

struct EnvelopeCheck {
  bool holds = true;
  std::optional<std::size_t> first_violation;
  double max_ratio = 0.0;
};

namespace detail {

inline EnvelopeCheck check_against(const std::vector<double>& axis, const std::vector<double>& gaps,
                                   const EnvelopeBound& env) {
  EnvelopeCheck out;
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    const double bound = env.at(axis[i]);
    const double ratio = bound > 0.0 ? gaps[i] / bound : (gaps[i] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (gaps[i] > bound * (1.0 + 1e-10) && !out.first_violation) {
      out.holds = false;
      out.first_violation = i;
    }
  }
  return out;
}

}  // namespace detail

/// Pointwise gap <= envelope. Discrete runs use the iteration index as the axis, flows use time.
inline EnvelopeCheck check_envelope(const RunRecord& rec, const EnvelopeBound& env) {
  std::vector<double> k(rec.size());
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<double>(i);
  return detail::check_against(k, rec.f_gaps, env);
}

inline EnvelopeCheck check_envelope(const FlowRecord& rec, const EnvelopeBound& env) {
  return detail::check_against(rec.times, rec.f_gaps, env);
}

/// CSV of the envelope on the given axis: axis, bound.
inline void write_envelope_csv(std::ostream& os, const std::vector<double>& axis, const EnvelopeBound& env,
                               const char* axis_name = "t") {
  os << axis_name << ",bound\n";
  for (double t : axis) {
    detail::put_number(os, t);
    os << ',';
    detail::put_number(os, env.at(t));
    os << '\n';
  }
}

struct AvgAimingReport {
  double theta = 0.0;
  double a_avg_max = 0.0;
  double pointwise_min = 0.0;
  int violated_steps = 0;
};

namespace detail {

/// Ratio of weighted sums with log-weights lw_i, numerators ip_i = <g, x - x*>, norms n_i = |g| |x - x*|.
inline AvgAimingReport weighted_aiming(double theta, const std::vector<double>& lw, const std::vector<double>& ip,
                                       const std::vector<double>& nrm) {
  AvgAimingReport rep;
  rep.theta = theta;
  rep.pointwise_min = std::numeric_limits<double>::infinity();
  double lmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lw.size(); ++i)
    if (nrm[i] > 0.0) lmax = std::max(lmax, lw[i]);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lw.size(); ++i) {
    if (!(nrm[i] > 0.0)) continue;
    const double w = std::exp(lw[i] - lmax);
    num += w * ip[i];
    den += w * nrm[i];
    const double a = ip[i] / nrm[i];
    rep.pointwise_min = std::min(rep.pointwise_min, a);
    if (a < 0.0) ++rep.violated_steps;
  }
  if (!(den > 0.0)) throw DegenerateTrajectoryError("avg_aiming: zero denominator");
  rep.a_avg_max = num / den;
  return rep;
}

}  // namespace detail

/// Largest a_avg with sum_i A_i (<g_i, x_i - x*> - a_avg |g_i| |x_i - x*|) >= 0, A_i = e^{theta times_i},
/// evaluated at the record's probe points.
inline AvgAimingReport avg_aiming(const RunRecord& rec, double theta, const Point& x_star) {
  std::vector<double> lw, ip, nrm;
  for (std::size_t i = 0; i < rec.size(); ++i) {
    const double n = rec.grad_norms[i] * (rec.probes[i] - x_star).norm();
    lw.push_back(theta * rec.times[i]);
    const double a = rec.aiming_values[i];
    nrm.push_back(std::isnan(a) ? 0.0 : n);
    ip.push_back(std::isnan(a) ? 0.0 : a * n);
  }
  return detail::weighted_aiming(theta, lw, ip, nrm);
}

/// Continuous-time version on a flow record, with trapezoid weights times e^{theta t}.
inline AvgAimingReport avg_aiming(const Objective& obj, const FlowRecord& rec, double theta) {
  const Point& xs = obj.require_x_star();
  const std::size_t n = rec.size();
  if (n < 2) throw DegenerateTrajectoryError("avg_aiming: record too short");
  std::vector<double> lw(n), ip(n), nrm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = (i == 0 ? 0.0 : rec.times[i] - rec.times[i - 1]) + (i + 1 == n ? 0.0 : rec.times[i + 1] - rec.times[i]);
    const Point g = obj.grad(rec.x_points[i]);
    const Point r = rec.x_points[i] - xs;
    lw[i] = theta * rec.times[i] + std::log(0.5 * dt);
    ip[i] = g.dot(r);
    nrm[i] = g.norm() * r.norm();
  }
  return detail::weighted_aiming(theta, lw, ip, nrm);
}

/// RHS - LHS of <g, x* - x> <= -a sqrt(mu/L0) (f - f*) - (a/2) sqrt(mu mu0) |x - x*|^2.
inline double check_lemma_c1(const Objective& obj, const Point& x, const RateConstants& c) {
  using detail::need;
  const double mu = need(c.mu, "mu"), mu0 = need(c.mu0, "mu0"), L0 = need(c.L0, "L0"), a = need(c.a, "a");
  const Point r = x - obj.require_x_star();
  const double gap = obj.eval(x) - obj.require_f_star();
  const double lhs = -obj.grad(x).dot(r);
  const double rhs = -a * std::sqrt(mu / L0) * gap - 0.5 * a * std::sqrt(mu * mu0) * r.squaredNorm();
  return rhs - lhs;
}

/// LHS - RHS of |x - x*| |g| >= sqrt(mu/L0) (f - f*) + (sqrt(mu mu0)/2) |x - x*|^2.
inline double check_lemma_c2(const Objective& obj, const Point& x, const RateConstants& c) {
  using detail::need;
  const double mu = need(c.mu, "mu"), mu0 = need(c.mu0, "mu0"), L0 = need(c.L0, "L0");
  const Point r = x - obj.require_x_star();
  const double gap = obj.eval(x) - obj.require_f_star();
  const double lhs = r.norm() * obj.grad(x).norm();
  const double rhs = std::sqrt(mu / L0) * gap + 0.5 * std::sqrt(mu * mu0) * r.squaredNorm();
  return lhs - rhs;
}

/// |<g, x* - x> + a(x) sqrt(mu(x)/mu0(x)) (f - f*) + (a(x)/2) sqrt(mu(x) mu0(x)) |x - x*|^2| with the
/// pointwise PL, quadratic-growth and aiming values at x.
inline double check_lemma_c3_identity(const Objective& obj, const Point& x) {
  const Point r = x - obj.require_x_star();
  const double gap = obj.eval(x) - obj.require_f_star();
  const Point g = obj.grad(x);
  const double nr = r.norm(), ng = g.norm();
  if (nr == 0.0 || ng == 0.0 || !(gap > 0.0)) throw DegeneratePointError("check_lemma_c3_identity: degenerate point");
  const double mu = g.squaredNorm() / (2.0 * gap);
  const double mu0 = 2.0 * gap / r.squaredNorm();
  const double a = g.dot(r) / (ng * nr);
  const double lhs = -g.dot(r);
  const double rhs = -a * std::sqrt(mu / mu0) * gap - 0.5 * a * std::sqrt(mu * mu0) * r.squaredNorm();
  return std::abs(lhs - rhs);
}

struct HighProbResult {
  double empirical_frac = 0.0;
  double theoretical_floor = 0.0;
};

inline double high_prob_floor(double c0, double c1, int k) {
  return 1.0 - 1.0 / c0 - std::exp(-(c1 - 1.0 - std::log(c1)) * k);
}

/// Fraction of n_seeds continuized runs (seeds cfg.seed + i) with gap(k) <= c0 K e^{-rate (1 - c1) k},
/// where `env` carries the base multiplier K and rate.
inline HighProbResult high_prob_check(const Objective& obj, const NmContinuizedConfig& cfg, const EnvelopeBound& env,
                                      int k, int n_seeds, double c0, double c1, const Point& x0) {
  if (!(c0 > 1.0) || !(c1 > 0.0 && c1 < 1.0)) throw InvalidParamError("high_prob_check: need c0 > 1, 0 < c1 < 1");
  if (k < 0 || n_seeds < 1) throw InvalidParamError("high_prob_check: need k >= 0 and n_seeds >= 1");
  const double threshold = c0 * env.K * std::exp(-env.rate * (1.0 - c1) * k);
  std::vector<char> ok(static_cast<std::size_t>(n_seeds), 0);
  parallel_for(ok.size(), [&](std::size_t i) {
    NmContinuizedConfig run = cfg;
    run.iters = k;
    run.seed = cfg.seed + i;
    const RunRecord rec = run_nm_continuized(obj, run, x0);
    ok[i] = rec.size() == static_cast<std::size_t>(k) + 1 && rec.f_gaps.back() <= threshold;
  });
  HighProbResult res;
  res.empirical_frac = static_cast<double>(std::count(ok.begin(), ok.end(), 1)) / n_seeds;
  res.theoretical_floor = high_prob_floor(c0, c1, k);
  return res;
}

inline nlohmann::json to_json(const RateFit& f) {
  return {{"rate", f.rate}, {"intercept", f.intercept}, {"r_squared", f.r_squared},
          {"window", {f.window.first, f.window.second}}};
}

inline nlohmann::json to_json(const AvgAimingReport& r) {
  return {{"theta", r.theta}, {"a_avg_max", r.a_avg_max}, {"pointwise_min", r.pointwise_min},
          {"violated_steps", r.violated_steps}};
}

inline nlohmann::json to_json(const EnvelopeBound& e, const EnvelopeCheck& c) {
  nlohmann::json j{{"source", e.source},
                   {"K", e.K},
                   {"rate", e.rate},
                   {"kind", e.kind == EnvelopeKind::continuous ? "continuous" : "discrete"},
                   {"holds", c.holds},
                   {"max_ratio", c.max_ratio}};
  j["first_violation"] = c.first_violation ? nlohmann::json(*c.first_violation) : nlohmann::json(nullptr);
  return j;
}

}  // namespace plaim

#endif  // PLAIM_TRAJECTORY_HPP
