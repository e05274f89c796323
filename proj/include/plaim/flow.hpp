// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_FLOW_HPP
#define PLAIM_FLOW_HPP

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "plaim/geometry.hpp"
#include "plaim/objective.hpp"
#include "plaim/optim.hpp"

namespace plaim {

/// Coefficient that is either a constant or a function of the current x.
struct Schedule {
  double value = 0.0;
  std::function<double(const Point&)> fn;

  Schedule() = default;
  Schedule(double v) : value(v) {}  // NOLINT(google-explicit-constructor)
  explicit Schedule(std::function<double(const Point&)> f) : fn(std::move(f)) {}

  bool is_constant() const { return !fn; }
  double at(const Point& x) const { return fn ? fn(x) : value; }
};

enum class NmoMode { constant, theorem3i, avg4ii, pl_prop, pointwise_exact };

/// Coefficients of x' = eta (z - x) - gamma g(x), z' = eta' (x - z) - gamma' g(x).
struct NmoParams {
  Schedule eta;
  Schedule eta_prime;
  double gamma = 0.0;
  Schedule gamma_prime;
  NmoMode mode = NmoMode::constant;

  bool is_constant() const { return eta.is_constant() && eta_prime.is_constant() && gamma_prime.is_constant(); }
};

struct FlowRecord {
  std::vector<double> times;
  std::vector<Point> x_points;
  std::vector<Point> z_points;  ///< empty for gradient flow
  std::vector<double> f_gaps;
  double step = 0.0;
  bool truncated = false;

  std::size_t size() const { return times.size(); }
};

namespace detail {

inline int step_count(double step, double t_end) {
  if (!(step > 0.0)) throw InvalidParamError("integrator: step must be positive");
  if (!(t_end >= step)) throw InvalidParamError("integrator: t_end must be >= step");
  return static_cast<int>(std::llround(t_end / step));
}

inline void push_flow(FlowRecord& rec, const Objective& obj, double t, const Point& x, const Point* z) {
  if (!x.allFinite() || (z && !z->allFinite())) throw IntegrationError("integrator: non-finite state");
  const double gap = obj.eval(x) - obj.f_star().value_or(0.0);
  if (!std::isfinite(gap)) throw IntegrationError("integrator: non-finite objective value");
  rec.times.push_back(t);
  rec.x_points.push_back(x);
  if (z) rec.z_points.push_back(*z);
  rec.f_gaps.push_back(gap);
}

}  // namespace detail

/// Classical fourth-order Runge-Kutta integration of x' = -grad f(x).
inline FlowRecord integrate_gf(const Objective& obj, const Point& x0, double step, double t_end) {
  const int n = detail::step_count(step, t_end);
  check_start(obj, x0);
  FlowRecord rec;
  rec.step = step;
  Point x = x0;
  detail::push_flow(rec, obj, 0.0, x, nullptr);
  for (int k = 1; k <= n; ++k) {
    const Point k1 = -obj.grad(x);
    const Point k2 = -obj.grad(x + 0.5 * step * k1);
    const Point k3 = -obj.grad(x + 0.5 * step * k2);
    const Point k4 = -obj.grad(x + step * k3);
    x += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    detail::push_flow(rec, obj, k * step, x, nullptr);
  }
  return rec;
}

/// Fourth-order integration of the momentum ODE from z0 = x0. State-dependent coefficients that
/// hit a singularity near the minimizer end the record early with `truncated` set.
inline FlowRecord integrate_nmo(const Objective& obj, const NmoParams& params, const Point& x0, double step,
                                double t_end) {
  const int n = detail::step_count(step, t_end);
  check_start(obj, x0);
  if (!(params.gamma >= 0.0)) throw InvalidParamError("integrate_nmo: gamma must be >= 0");
  const bool pointwise = !params.is_constant();
  const double stop_dist = 1e-9 * obj.domain().diameter();
  if (pointwise) obj.require_x_star();

  auto rhs = [&](const Point& x, const Point& z, Point& dx, Point& dz) {
    const Point g = obj.grad(x);
    const double eta = params.eta.at(x);
    const double eta_p = params.eta_prime.at(x);
    if (!(eta + eta_p > 0.0)) throw InvalidParamError("integrate_nmo: eta + eta' must be positive");
    dx = eta * (z - x) - params.gamma * g;
    dz = eta_p * (x - z) - params.gamma_prime.at(x) * g;
  };

  FlowRecord rec;
  rec.step = step;
  Point x = x0;
  Point z = x0;
  detail::push_flow(rec, obj, 0.0, x, &z);
  const Point d0 = Point::Zero(x.size());
  for (int k = 1; k <= n; ++k) {
    if (pointwise && (x - *obj.x_star()).norm() < stop_dist) {
      rec.truncated = true;
      break;
    }
    Point a1 = d0, b1 = d0, a2 = d0, b2 = d0, a3 = d0, b3 = d0, a4 = d0, b4 = d0;
    try {
      rhs(x, z, a1, b1);
      rhs(x + 0.5 * step * a1, z + 0.5 * step * b1, a2, b2);
      rhs(x + 0.5 * step * a2, z + 0.5 * step * b2, a3, b3);
      rhs(x + step * a3, z + step * b3, a4, b4);
    } catch (const NearOptimumError&) {
      if (!pointwise) throw;
      rec.truncated = true;
      break;
    } catch (const DegeneratePointError&) {
      if (!pointwise) throw;
      rec.truncated = true;
      break;
    }
    x += step / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    z += step / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4);
    detail::push_flow(rec, obj, k * step, x, &z);
  }
  return rec;
}

inline NmoParams nmo_constant(double eta, double eta_prime, double gamma, double gamma_prime) {
  if (!(eta + eta_prime > 0.0)) throw InvalidParamError("nmo_constant: eta + eta' must be positive");
  if (!(gamma >= 0.0)) throw InvalidParamError("nmo_constant: gamma must be >= 0");
  return NmoParams{eta, eta_prime, gamma, gamma_prime, NmoMode::constant};
}

/// Accelerated flow parameters under PL, aiming and quadratic growth; gamma >= 0 is free.
inline NmoParams nmo_params_theorem3i(double mu, double mu0, double L0, double a, double gamma) {
  if (!(mu > 0.0 && mu <= mu0 && mu0 <= L0)) throw InvalidParamError("nmo_params_theorem3i: need 0 < mu <= mu0 <= L0");
  if (!(a > 0.0 && a <= 1.0)) throw InvalidParamError("nmo_params_theorem3i: need 0 < a <= 1");
  if (!(gamma >= 0.0)) throw InvalidParamError("nmo_params_theorem3i: gamma must be >= 0");
  const double prod = std::pow(mu0 * L0, 0.25);
  return NmoParams{prod, a * std::pow(mu0 / L0, 0.25) * std::sqrt(mu), gamma, 1.0 / prod, NmoMode::theorem3i};
}

/// Same bundle with the trajectory-averaged aiming value in place of the uniform one.
inline NmoParams nmo_params_avg(double mu, double mu0, double L0, double a_avg, double gamma) {
  NmoParams p = nmo_params_theorem3i(mu, mu0, L0, a_avg, gamma);
  p.mode = NmoMode::avg4ii;
  return p;
}

/// Constant eta, eta' with gamma = (eta + eta') / mu. gamma' must exceed gamma; it defaults to 2 gamma.
inline NmoParams nmo_params_pl_prop(double mu, double eta, double eta_prime, std::optional<double> gamma_prime = {}) {
  if (!(mu > 0.0)) throw InvalidParamError("nmo_params_pl_prop: mu must be positive");
  if (!(eta >= 0.0 && eta_prime >= 0.0 && eta + eta_prime > 0.0))
    throw InvalidParamError("nmo_params_pl_prop: need eta, eta' >= 0 with positive sum");
  const double gamma = (eta + eta_prime) / mu;
  const double gp = gamma_prime.value_or(2.0 * gamma);
  if (!(gp > gamma)) throw InvalidParamError("nmo_params_pl_prop: gamma' must exceed gamma");
  return NmoParams{eta, eta_prime, gamma, gp, NmoMode::pl_prop};
}

/// State-dependent bundle eta' = a(x) sqrt(mu(x)), eta = L0_cap / sqrt(mu0(x)), gamma' = 1 / sqrt(mu0(x)),
/// gamma = 0, with the pointwise PL, aiming and quadratic-growth values.
inline NmoParams nmo_params_pointwise(const Objective& obj, double L0_cap) {
  if (!(L0_cap > 0.0)) throw InvalidParamError("nmo_params_pointwise: L0_cap must be positive");
  obj.require_x_star();
  const Objective* o = &obj;
  NmoParams p;
  p.eta = Schedule([o, L0_cap](const Point& x) { return L0_cap / std::sqrt(pointwise_qg(*o, x)); });
  p.eta_prime = Schedule([o](const Point& x) { return pointwise_aiming(*o, x) * std::sqrt(pointwise_pl(*o, x)); });
  p.gamma_prime = Schedule([o](const Point& x) { return 1.0 / std::sqrt(pointwise_qg(*o, x)); });
  p.gamma = 0.0;
  p.mode = NmoMode::pointwise_exact;
  return p;
}

/// Max norm over interior samples of x'' + (eta + eta') x' + gamma H x' + (eta' gamma + eta gamma') g(x),
/// with derivatives by central differences of the recorded positions.
inline double hb_residual(const Objective& obj, const FlowRecord& rec, const NmoParams& params) {
  if (rec.size() < 3) throw InvalidInputError("hb_residual: record needs at least 3 points");
  if (!params.is_constant()) throw InvalidInputError("hb_residual: parameters must be constant");
  const double h = rec.step;
  const double eta = params.eta.value, eta_p = params.eta_prime.value;
  const double gamma = params.gamma, gamma_p = params.gamma_prime.value;
  double worst = 0.0;
  for (std::size_t i = 1; i + 1 < rec.size(); ++i) {
    const Point& xm = rec.x_points[i - 1];
    const Point& x = rec.x_points[i];
    const Point& xp = rec.x_points[i + 1];
    const Point vel = (xp - xm) / (2.0 * h);
    const Point acc = (xp - 2.0 * x + xm) / (h * h);
    Point res = acc + (eta + eta_p) * vel + (eta_p * gamma + eta * gamma_p) * obj.grad(x);
    if (gamma != 0.0) {
      const double vn = vel.norm();
      if (vn > 0.0) {
        const double fd = 1e-4 * (1.0 + x.norm());
        res += gamma * vn * detail::hessian_vec_unchecked(obj, x, vel / vn, fd);
      }
    }
    worst = std::max(worst, res.norm());
  }
  return worst;
}

/// Max over the record of |log gap(t) - log gap(0) + 2 int_0^t mu(x_s) ds|, with the pointwise
/// PL value mu(x) and the trapezoid rule on the record's grid.
inline double exact_gf_check(const Objective& obj, const FlowRecord& rec) {
  if (rec.size() < 2) throw InvalidInputError("exact_gf_check: record needs at least 2 points");
  if (!(rec.f_gaps.front() > 1e-14)) throw InvalidInputError("exact_gf_check: f_gaps must be positive");
  const double log0 = std::log(rec.f_gaps.front());
  double integral = 0.0;
  double prev_mu = pointwise_pl(obj, rec.x_points.front());
  double worst = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (!(rec.f_gaps[i] > 1e-14)) break;
    const double mu = pointwise_pl(obj, rec.x_points[i]);
    integral += 0.5 * (rec.times[i] - rec.times[i - 1]) * (mu + prev_mu);
    prev_mu = mu;
    worst = std::max(worst, std::abs(std::log(rec.f_gaps[i]) - log0 + 2.0 * integral));
  }
  return worst;
}

/// CSV with columns t, x_1..x_d, z_1..z_d (momentum flows only), f_gap.
inline void write_flow_csv(std::ostream& os, const FlowRecord& rec) {
  const Eigen::Index d = rec.x_points.empty() ? 0 : rec.x_points.front().size();
  const bool has_z = !rec.z_points.empty();
  os << "t";
  for (Eigen::Index i = 1; i <= d; ++i) os << ",x" << i;
  if (has_z)
    for (Eigen::Index i = 1; i <= d; ++i) os << ",z" << i;
  os << ",f_gap\n";
  for (std::size_t k = 0; k < rec.size(); ++k) {
    detail::put_number(os, rec.times[k]);
    for (Eigen::Index i = 0; i < d; ++i) {
      os << ',';
      detail::put_number(os, rec.x_points[k][i]);
    }
    if (has_z)
      for (Eigen::Index i = 0; i < d; ++i) {
        os << ',';
        detail::put_number(os, rec.z_points[k][i]);
      }
    os << ',';
    detail::put_number(os, rec.f_gaps[k]);
    os << '\n';
  }
}

}  // namespace plaim

#endif  // PLAIM_FLOW_HPP
