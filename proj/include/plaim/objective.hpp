// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_OBJECTIVE_HPP
#define PLAIM_OBJECTIVE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "plaim/errors.hpp"

namespace plaim {

using Point = Eigen::VectorXd;

inline Point make_point(std::initializer_list<double> coords) {
  Point p(static_cast<Eigen::Index>(coords.size()));
  Eigen::Index i = 0;
  for (double c : coords) p[i++] = c;
  return p;
}

inline bool is_finite(const Point& p) { return p.size() >= 1 && p.allFinite(); }

inline void require_point(const Point& p, const char* what) {
  if (!is_finite(p)) throw InvalidInputError(std::string(what) + ": point must be finite with dimension >= 1");
}

struct Box {
  Point lower;
  Point upper;

  static Box cube(int dim, double lo, double hi) {
    return Box{Point::Constant(dim, lo), Point::Constant(dim, hi)};
  }
  int dim() const { return static_cast<int>(lower.size()); }
  bool contains(const Point& x, double slack = 0.0) const {
    if (x.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] < lower[i] - slack || x[i] > upper[i] + slack) return false;
    return true;
  }
  double diameter() const { return (upper - lower).norm(); }
  Point sample(std::mt19937_64& rng) const {
    Point x(lower.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      std::uniform_real_distribution<double> u(lower[i], upper[i]);
      x[i] = u(rng);
    }
    return x;
  }
};

/// Differentiable scalar objective on a box. Immutable after construction.
class Objective {
 public:
  using ValueFn = std::function<double(const Point&)>;
  using GradFn = std::function<Point(const Point&)>;
  /// Returns true when x lies within `tol` of a point where the gradient is only C^0 or C^1.
  using KinkFn = std::function<bool(const Point&, double)>;

  Objective(std::string name, Box domain, ValueFn value, GradFn gradient,
            std::optional<double> f_star = std::nullopt, std::optional<Point> x_star = std::nullopt,
            KinkFn near_kink = {})
      : name_(std::move(name)),
        domain_(std::move(domain)),
        value_(std::move(value)),
        gradient_(std::move(gradient)),
        f_star_(f_star),
        x_star_(std::move(x_star)),
        near_kink_(std::move(near_kink)) {
    if (domain_.dim() < 1 || domain_.upper.size() != domain_.lower.size())
      throw InvalidParamError("objective " + name_ + ": invalid domain");
    for (int i = 0; i < domain_.dim(); ++i)
      if (!(domain_.lower[i] < domain_.upper[i]))
        throw InvalidParamError("objective " + name_ + ": empty domain box");
    if (x_star_) {
      if (!f_star_) throw InvalidParamError("objective " + name_ + ": x_star without f_star");
      if (x_star_->size() != domain_.dim())
        throw InvalidParamError("objective " + name_ + ": x_star dimension mismatch");
      const double fx = value_(*x_star_);
      if (std::abs(fx - *f_star_) > 1e-12 * (1.0 + std::abs(*f_star_)))
        throw InvalidParamError("objective " + name_ + ": eval(x_star) differs from f_star");
    }
  }

  const std::string& name() const { return name_; }
  int dim() const { return domain_.dim(); }
  const Box& domain() const { return domain_; }
  const std::optional<double>& f_star() const { return f_star_; }
  const std::optional<Point>& x_star() const { return x_star_; }

  double eval(const Point& x) const { return value_(x); }
  Point grad(const Point& x) const { return gradient_(x); }
  bool near_kink(const Point& x, double tol) const { return near_kink_ && near_kink_(x, tol); }

  double require_f_star() const {
    if (!f_star_) throw MissingConstantError("objective " + name_ + " has no known f_star");
    return *f_star_;
  }
  const Point& require_x_star() const {
    if (!x_star_) throw MissingConstantError("objective " + name_ + " has no known x_star");
    return *x_star_;
  }

 private:
  std::string name_;
  Box domain_;
  ValueFn value_;
  GradFn gradient_;
  std::optional<double> f_star_;
  std::optional<Point> x_star_;
  KinkFn near_kink_;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  Point worst_point;
  double step_used = 0.0;
};

namespace detail {

inline Point hessian_vec_unchecked(const Objective& obj, const Point& x, const Point& v, double h) {
  return (obj.grad(x + h * v) - obj.grad(x - h * v)) / (2.0 * h);
}

inline Point central_gradient(const Objective& obj, const Point& x, double h) {
  Point g(x.size());
  Point xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = obj.eval(xp);
    xp[i] = xi - h;
    const double fm = obj.eval(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest |eigenvalue| of the local Hessian at x by power iteration on FD Hessian-vector
/// products. Evaluates outside the domain when x sits on its boundary.
inline double curvature_power(const Objective& obj, const Point& x, int iters, std::mt19937_64& rng,
                              double h = 1e-4) {
  std::normal_distribution<double> n01;
  Point v(x.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n01(rng);
  v.normalize();
  double lambda = 0.0;
  for (int k = 0; k < iters; ++k) {
    Point w = hessian_vec_unchecked(obj, x, v, h);
    const double nw = w.norm();
    lambda = nw;
    if (nw == 0.0) break;
    v = w / nw;
  }
  return lambda;
}

}  // namespace detail

/// Central-difference Hessian-vector product (grad(x+hv) - grad(x-hv)) / 2h.
inline Point hessian_vec_fd(const Objective& obj, const Point& x, const Point& v, double h = 1e-4) {
  if (!(h > 0.0)) throw InvalidParamError("hessian_vec_fd: step must be positive");
  if (x.size() != obj.dim() || v.size() != obj.dim())
    throw InvalidInputError("hessian_vec_fd: dimension mismatch");
  if (!obj.domain().contains(x + h * v) || !obj.domain().contains(x - h * v))
    throw DomainError("hessian_vec_fd: x +/- h*v leaves the domain");
  return detail::hessian_vec_unchecked(obj, x, v, h);
}

/// Compares the analytic gradient with central differences at uniform samples.
/// The relative error is measured against max(|grad|, 1).
inline GradCheckReport check_gradient_fd(const Objective& obj, int samples, std::uint64_t seed) {
  if (samples < 1) throw InvalidParamError("check_gradient_fd: samples must be positive");
  std::mt19937_64 rng(seed);
  GradCheckReport report;
  report.worst_point = Point::Zero(obj.dim());
  double largest_step = 0.0;
  for (int s = 0; s < samples; ++s) {
    Point x = obj.domain().sample(rng);
    int retries = 0;
    while (obj.near_kink(x, 1e-6 + 2e-6 * (1.0 + x.norm())) && retries++ < 1000)
      x = obj.domain().sample(rng);
    const double h = 1e-6 * (1.0 + x.norm());
    const Point analytic = obj.grad(x);
    const Point numeric = detail::central_gradient(obj, x, h);
    const double err = (analytic - numeric).norm() / std::max(analytic.norm(), 1.0);
    if (err > report.max_rel_error || s == 0) {
      report.max_rel_error = std::max(err, report.max_rel_error);
      report.worst_point = x;
    }
    largest_step = std::max(largest_step, h);
  }
  report.step_used = largest_step;
  return report;
}

}  // namespace plaim

#endif  // PLAIM_OBJECTIVE_HPP
