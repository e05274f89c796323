// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_TESTBED_HPP
#define PLAIM_TESTBED_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "plaim/objective.hpp"

namespace plaim {

struct BenchmarkSpec {
  Objective objective;
  std::map<std::string, double> analytic;
  std::string notes;
};

/// f(u) = A (u + b sin(c u))^2 on [-half_width, half_width].
inline BenchmarkSpec sine_quadratic_1d(double A, double b, double c, double half_width = 2.0) {
  if (!(A > 0.0) || !(c > 0.0)) throw InvalidParamError("sine_quadratic_1d: need A > 0 and c > 0");
  if (!(std::abs(b * c) < 1.0)) throw InvalidParamError("sine_quadratic_1d: need |b c| < 1");
  if (!(half_width > 0.0)) throw InvalidParamError("sine_quadratic_1d: half_width must be positive");
  auto value = [=](const Point& x) {
    const double s = x[0] + b * std::sin(c * x[0]);
    return A * s * s;
  };
  auto grad = [=](const Point& x) {
    const double u = x[0];
    Point g(1);
    g[0] = 2.0 * A * (u + b * std::sin(c * u)) * (1.0 + b * c * std::cos(c * u));
    return g;
  };
  std::ostringstream name;
  name << "sine-quadratic:" << A << "," << b << "," << c;
  return BenchmarkSpec{Objective(name.str(), Box::cube(1, -half_width, half_width), value, grad, 0.0,
                                 Point::Zero(1)),
                       {},
                       "A (u + b sin(c u))^2"};
}

/// f(x, y) = 0.5 (0.5 x^2 - y)^2 + 0.05 x^2 on [-1.2638, 1.2638]^2.
inline BenchmarkSpec valley_2d() {
  auto value = [](const Point& p) {
    const double r = 0.5 * p[0] * p[0] - p[1];
    return 0.5 * r * r + 0.05 * p[0] * p[0];
  };
  auto grad = [](const Point& p) {
    const double r = 0.5 * p[0] * p[0] - p[1];
    return make_point({r * p[0] + 0.1 * p[0], -r});
  };
  return BenchmarkSpec{
      Objective("valley-2d", Box::cube(2, -1.2638, 1.2638), value, grad, 0.0, Point::Zero(2)),
      {},
      "curved valley around the parabola y = x^2 / 2"};
}

/// F(x, y) = 0.5 (y - sin x)^2 + 0.5 eps x^2 on [-2 pi, 2 pi] x [-3, 3].
inline BenchmarkSpec sine_valley(double eps) {
  if (!(eps > 0.0)) throw InvalidParamError("sine_valley: eps must be positive");
  auto value = [=](const Point& p) {
    const double u = p[1] - std::sin(p[0]);
    return 0.5 * u * u + 0.5 * eps * p[0] * p[0];
  };
  auto grad = [=](const Point& p) {
    const double u = p[1] - std::sin(p[0]);
    return make_point({-u * std::cos(p[0]) + eps * p[0], u});
  };
  const double pi = std::numbers::pi;
  std::ostringstream name;
  name << "sine-valley:" << eps;
  return BenchmarkSpec{
      Objective(name.str(), Box{make_point({-2 * pi, -3.0}), make_point({2 * pi, 3.0})}, value, grad, 0.0,
                Point::Zero(2)),
      {{"pl_mu_bound", (2.0 + eps - std::sqrt(eps * eps + 4.0)) / 2.0}},
      "sinusoidal valley with weak quadratic confinement along x"};
}

/// Coefficients of the angular factor of radial_sqc, drawn in the order a, b, c, d per term.
struct RadialCoefficients {
  std::vector<double> a, b, c, d;
};

inline RadialCoefficients radial_coefficients(int N, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.0, 20.0);
  std::uniform_real_distribution<double> freq(-25.0, 25.0);
  RadialCoefficients k;
  for (int i = 0; i < N; ++i) {
    k.a.push_back(amp(rng));
    k.b.push_back(freq(rng));
    k.c.push_back(amp(rng));
    k.d.push_back(freq(rng));
  }
  return k;
}

/// h(x) = |x|^2 g(x / |x|) with g(u) = 1 + (1/4N) sum a_i sin^2(b_i u_1) + c_i cos^2(d_i u_2), on [-1, 1]^2.
inline BenchmarkSpec radial_sqc(int N, std::uint64_t seed) {
  if (N < 1) throw InvalidParamError("radial_sqc: N must be >= 1");
  auto k = std::make_shared<const RadialCoefficients>(radial_coefficients(N, seed));
  const double w = 1.0 / (4.0 * N);
  auto angular = [k, w](double u1, double u2) {
    double g = 1.0;
    for (std::size_t i = 0; i < k->a.size(); ++i) {
      const double s = std::sin(k->b[i] * u1);
      const double c = std::cos(k->d[i] * u2);
      g += w * (k->a[i] * s * s + k->c[i] * c * c);
    }
    return g;
  };
  auto value = [angular](const Point& x) {
    const double r = x.norm();
    if (r == 0.0) return 0.0;
    return r * r * angular(x[0] / r, x[1] / r);
  };
  auto grad = [k, w, angular](const Point& x) {
    const double r = x.norm();
    if (r == 0.0) return Point(Point::Zero(2));
    const Point u = x / r;
    Point dg(2);
    dg[0] = 0.0;
    dg[1] = 0.0;
    for (std::size_t i = 0; i < k->a.size(); ++i) {
      dg[0] += w * k->a[i] * k->b[i] * std::sin(2.0 * k->b[i] * u[0]);
      dg[1] -= w * k->c[i] * k->d[i] * std::sin(2.0 * k->d[i] * u[1]);
    }
    const Point tangential = dg - u * u.dot(dg);
    return Point(2.0 * x * angular(u[0], u[1]) + r * tangential);
  };
  std::ostringstream name;
  name << "radial-sqc:" << N << "," << seed;
  return BenchmarkSpec{Objective(name.str(), Box::cube(2, -1.0, 1.0), value, grad, 0.0, Point::Zero(2)),
                       {},
                       "radial profile t^2 times a random angular factor >= 1"};
}

/// f(x) = 0.5 sum lambda_i x_i^2 on [-1, 1]^d.
inline BenchmarkSpec quadratic_diag(const std::vector<double>& lambdas) {
  if (lambdas.empty()) throw InvalidParamError("quadratic_diag: need at least one eigenvalue");
  for (double l : lambdas)
    if (!(l > 0.0)) throw InvalidParamError("quadratic_diag: eigenvalues must be positive");
  const int d = static_cast<int>(lambdas.size());
  Point lam(d);
  for (int i = 0; i < d; ++i) lam[i] = lambdas[static_cast<std::size_t>(i)];
  auto value = [lam](const Point& x) { return 0.5 * (lam.array() * x.array().square()).sum(); };
  auto grad = [lam](const Point& x) { return Point(lam.cwiseProduct(x)); };
  const double lo = lam.minCoeff();
  const double hi = lam.maxCoeff();
  std::ostringstream name;
  name << "quadratic-diag:";
  for (int i = 0; i < d; ++i) name << (i ? "," : "") << lam[i];
  return BenchmarkSpec{Objective(name.str(), Box::cube(d, -1.0, 1.0), value, grad, 0.0, Point::Zero(d)),
                       {{"mu", lo},
                        {"L", hi},
                        {"mu0", lo},
                        {"L0", hi},
                        {"a", d == 1 ? 1.0 : 2.0 * std::sqrt(lo * hi) / (lo + hi)}},
                       "diagonal quadratic"};
}

struct HardInstanceConfig {
  int T = 10;
  int t = 5;
  std::vector<double> y;  ///< empty means all ones
  double anchor = 1.0;
  std::optional<double> scale;  ///< unset means scale = target_L / L_raw
  double target_mu = 1e-4;
  double target_L = 1e3;
};

namespace detail {

inline double bump(double u, double y) {
  const double a = 31.0 * y / 32.0;
  const double c = 33.0 * y / 32.0;
  if (u <= a) return 0.5 * u * u;
  if (u <= y) return 0.5 * u * u - 16.0 * (u - a) * (u - a);
  if (u <= c) return 0.5 * u * u - y * y / 32.0 + 16.0 * (u - c) * (u - c);
  return 0.5 * u * u - y * y / 32.0;
}

inline double bump_derivative(double u, double y) {
  const double a = 31.0 * y / 32.0;
  const double c = 33.0 * y / 32.0;
  if (u <= a) return u;
  if (u <= y) return u - 32.0 * (u - a);
  if (u <= c) return u + 32.0 * (u - c);
  return u;
}

/// Chain quadratic with the index-0 slot replaced by `anchor`.
struct HardChain {
  int T, t;
  double anchor;
  std::vector<double> y;

  int dim() const { return T * t; }
  // Coordinate with chain index i (0 is the anchor).
  double at(const Point& x, int i) const { return i == 0 ? anchor : x[i - 1]; }

  double q(const Point& x) const {
    double s = 0.0;
    for (int b = 0; b < t; ++b) {
      const double r0 = 7.0 / 8.0 * at(x, b * T) - at(x, b * T + 1);
      s += r0 * r0;
      for (int j = 1; j < T; ++j) {
        const double r = at(x, b * T + j + 1) - at(x, b * T + j);
        s += r * r;
      }
    }
    return 0.5 * s;
  }

  Point q_grad(const Point& x) const {
    Point g = Point::Zero(dim());
    auto add = [&](int i, double v) {
      if (i > 0) g[i - 1] += v;
    };
    for (int b = 0; b < t; ++b) {
      const double r0 = 7.0 / 8.0 * at(x, b * T) - at(x, b * T + 1);
      add(b * T, 7.0 / 8.0 * r0);
      add(b * T + 1, -r0);
      for (int j = 1; j < T; ++j) {
        const double r = at(x, b * T + j + 1) - at(x, b * T + j);
        add(b * T + j + 1, r);
        add(b * T + j, -r);
      }
    }
    return g;
  }

  double raw(const Point& x) const {
    double s = q(x);
    for (int i = 0; i < dim(); ++i) s += bump(x[i], y[static_cast<std::size_t>(i)]);
    return s;
  }

  Point raw_grad(const Point& x) const {
    Point g = q_grad(x);
    for (int i = 0; i < dim(); ++i) g[i] += bump_derivative(x[i], y[static_cast<std::size_t>(i)]);
    return g;
  }

  bool near_kink(const Point& x, double tol) const {
    for (int i = 0; i < dim(); ++i) {
      const double yi = y[static_cast<std::size_t>(i)];
      for (double k : {31.0 * yi / 32.0, yi, 33.0 * yi / 32.0})
        if (std::abs(x[i] - k) <= tol) return true;
    }
    return false;
  }

  /// Minimizer of the raw function. Tries the convex region below every first breakpoint
  /// with a direct solve, then polishes by gradient descent.
  Point minimizer() const {
    const int d = dim();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d, d);
    Point e = Point::Zero(d);
    const Point g0 = q_grad(Point::Zero(d));
    for (int i = 0; i < d; ++i) {
      e.setZero();
      e[i] = 1.0;
      H.col(i) = q_grad(e) - g0;
      H(i, i) += 1.0;
    }
    Point x = H.ldlt().solve(-g0);
    for (int it = 0; it < 2000000; ++it) {
      const Point g = raw_grad(x);
      if (g.norm() < 1e-13) break;
      x -= g / (H.diagonal().maxCoeff() * 8.0 + 40.0);
    }
    return x;
  }
};

}  // namespace detail

/// Raw chain quadratic q (before scaling and offset), for inspection and tests.
inline double hard_pl_raw_q(const HardInstanceConfig& cfg, const Point& x) {
  std::vector<double> y = cfg.y.empty() ? std::vector<double>(static_cast<std::size_t>(cfg.T * cfg.t), 1.0) : cfg.y;
  return detail::HardChain{cfg.T, cfg.t, cfg.anchor, y}.q(x);
}

inline double hard_pl_bump(double u, double y) { return detail::bump(u, y); }
inline double hard_pl_bump_derivative(double u, double y) { return detail::bump_derivative(u, y); }

/// Zero-chain PL instance scale * (q(x) + sum v_{y_i}(x_i)), shifted so the minimum is 0.
/// The minimizer is computed numerically: the anchor makes it nonzero.
inline BenchmarkSpec hard_pl_instance(const HardInstanceConfig& cfg) {
  if (cfg.T < 1 || cfg.t < 1) throw InvalidParamError("hard_pl_instance: T and t must be positive");
  const int d = cfg.T * cfg.t;
  std::vector<double> y = cfg.y.empty() ? std::vector<double>(static_cast<std::size_t>(d), 1.0) : cfg.y;
  if (static_cast<int>(y.size()) != d) throw InvalidParamError("hard_pl_instance: y must have length T*t");
  for (double yi : y)
    if (!(yi > 0.0)) throw InvalidParamError("hard_pl_instance: y entries must be positive");
  if (cfg.scale && !(*cfg.scale > 0.0)) throw InvalidParamError("hard_pl_instance: scale must be positive");

  auto chain = std::make_shared<const detail::HardChain>(detail::HardChain{cfg.T, cfg.t, cfg.anchor, y});
  const Point xs = chain->minimizer();
  const double raw_min = chain->raw(xs);
  const double ymax = *std::max_element(y.begin(), y.end());
  const double half = 2.0 * std::max(ymax, std::abs(cfg.anchor));
  const Box box = Box::cube(d, -half, half);

  double scale = 1.0;
  double L_raw = 0.0;
  if (cfg.scale) {
    scale = *cfg.scale;
  } else {
    Objective raw("hard-pl-raw", box, [chain](const Point& x) { return chain->raw(x); },
                  [chain](const Point& x) { return chain->raw_grad(x); });
    std::mt19937_64 rng(0);
    for (int s = 0; s < 1000; ++s) {
      const Point x = box.sample(rng);
      L_raw = std::max(L_raw, detail::curvature_power(raw, x, 50, rng));
    }
    scale = cfg.target_L / L_raw;
  }

  auto value = [chain, scale, raw_min](const Point& x) { return scale * (chain->raw(x) - raw_min); };
  auto grad = [chain, scale](const Point& x) { return Point(scale * chain->raw_grad(x)); };
  auto kink = [chain](const Point& x, double tol) { return chain->near_kink(x, tol); };
  std::ostringstream name;
  name << "hard-pl:T=" << cfg.T << ",t=" << cfg.t;
  std::map<std::string, double> analytic{{"scale", scale}, {"raw_min", raw_min}};
  if (L_raw > 0.0) analytic["L_raw"] = L_raw;
  return BenchmarkSpec{Objective(name.str(), box, value, grad, 0.0, xs, kink), analytic,
                       "zero-chain quadratic plus C1 bump terms"};
}

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_number(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw InvalidParamError("");
    return v;
  } catch (const std::exception&) {
    throw InvalidParamError("benchmark '" + spec + "': cannot parse number '" + s + "'");
  }
}

}  // namespace detail

/// Builds a benchmark from a registry string such as "sine-quadratic:5,0.19,5",
/// "sine-valley:1e-3", "hard-pl:T=10,t=5", "quadratic-diag:1,4", "radial-sqc:10,42", "valley-2d".
inline BenchmarkSpec make_benchmark(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
  std::vector<double> nums;
  std::map<std::string, std::string> kv;
  if (!args.empty()) {
    for (const auto& tok : detail::split(args, ',')) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos)
        nums.push_back(detail::parse_number(tok, spec));
      else
        kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (nums.size() < lo || nums.size() > hi)
      throw InvalidParamError("benchmark '" + spec + "': wrong number of arguments");
  };
  if (name == "sine-quadratic") {
    need(3, 4);
    return sine_quadratic_1d(nums[0], nums[1], nums[2], nums.size() == 4 ? nums[3] : 2.0);
  }
  if (name == "valley-2d") {
    need(0, 0);
    return valley_2d();
  }
  if (name == "sine-valley") {
    need(1, 1);
    return sine_valley(nums[0]);
  }
  if (name == "radial-sqc") {
    need(1, 2);
    return radial_sqc(static_cast<int>(nums[0]), nums.size() > 1 ? static_cast<std::uint64_t>(nums[1]) : 0);
  }
  if (name == "quadratic-diag") {
    need(1, 1000000);
    return quadratic_diag(nums);
  }
  if (name == "hard-pl") {
    need(0, 0);
    HardInstanceConfig cfg;
    for (const auto& [key, val] : kv) {
      const double v = detail::parse_number(val, spec);
      if (key == "T")
        cfg.T = static_cast<int>(v);
      else if (key == "t")
        cfg.t = static_cast<int>(v);
      else if (key == "anchor")
        cfg.anchor = v;
      else if (key == "y")
        cfg.y.assign(static_cast<std::size_t>(cfg.T * cfg.t), v);
      else if (key == "scale")
        cfg.scale = v;
      else if (key == "target_mu")
        cfg.target_mu = v;
      else if (key == "target_L")
        cfg.target_L = v;
      else
        throw InvalidParamError("benchmark '" + spec + "': unknown key '" + key + "'");
    }
    if (!cfg.y.empty()) cfg.y.assign(static_cast<std::size_t>(cfg.T * cfg.t), cfg.y.front());
    return hard_pl_instance(cfg);
  }
  throw InvalidParamError("unknown benchmark '" + name + "'");
}

}  // namespace plaim

#endif  // PLAIM_TESTBED_HPP
