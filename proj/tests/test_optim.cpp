#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "plaim/geometry.hpp"
#include "plaim/optim.hpp"
#include "plaim/testbed.hpp"

using namespace plaim;

namespace {

Objective scaled_square(double L) {
  return Objective("sq", Box::cube(1, -5, 5), [L](const Point& x) { return 0.5 * L * x[0] * x[0]; },
                   [L](const Point& x) { return Point(L * x); }, 0.0, Point::Zero(1));
}

bool same_iterates(const RunRecord& a, const RunRecord& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a.iterates[i].array() == b.iterates[i].array()).all()) return false;
  return true;
}

}  // namespace

TEST(Noise, ExactOracleIsDeterministic) {
  const auto f = quadratic_diag({1, 4}).objective;
  std::mt19937_64 rng(0);
  const Point x = make_point({0.3, -0.2});
  EXPECT_TRUE((sgc_oracle(f, x, NoiseModel::exact(), rng).array() == f.grad(x).array()).all());
  EXPECT_TRUE((sgc_oracle(f, x, NoiseModel::two_point(1.0), rng).array() == f.grad(x).array()).all());
}

TEST(Noise, TwoPointMomentsAndOutcomes) {
  const auto f = quadratic_diag({1, 4}).objective;
  const Point x = make_point({0.5, 0.25});
  const Point g = f.grad(x);
  std::mt19937_64 rng(17);
  const int n = 100000;
  Point mean = Point::Zero(2);
  double second = 0.0;
  for (int i = 0; i < n; ++i) {
    const Point s = sgc_oracle(f, x, NoiseModel::two_point(2.0), rng);
    const double factor = s[0] / g[0];
    EXPECT_TRUE(std::abs(factor) < 1e-12 || std::abs(factor - 2.0) < 1e-12);
    mean += s;
    second += s.squaredNorm();
  }
  mean /= n;
  // Each coordinate has standard deviation |g_i| per draw.
  for (int k = 0; k < 2; ++k) EXPECT_LE(std::abs(mean[k] - g[k]), 3.0 * std::abs(g[k]) / std::sqrt(n));
  EXPECT_NEAR(second / n, 2.0 * g.squaredNorm(), 0.02 * 2.0 * g.squaredNorm());
}

TEST(Noise, Validation) {
  EXPECT_THROW(NoiseModel::two_point(0.5).validate(), InvalidParamError);
  NoiseModel bad;
  bad.rho = 2.0;
  EXPECT_THROW(bad.validate(), InvalidParamError);
}

TEST(Gd, OneStepOnHalfSquare) {
  const auto r = run_gd(scaled_square(1.0), GdConfig{1.0, 3, std::nullopt}, make_point({1.0}));
  EXPECT_EQ(r.iterates[1][0], 0.0);
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_EQ(r.f_gaps[k], 0.0);
}

TEST(Gd, InverseSmoothnessStepSolvesScaledSquare) {
  const auto r = run_gd(scaled_square(7.0), GdConfig{1.0 / 7.0, 5, std::nullopt}, make_point({2.0}));
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_NEAR(r.f_gaps[k], 0.0, 1e-28);
}

TEST(Gd, ClosedFormOnDiagonalQuadratic) {
  const auto f = quadratic_diag({1, 4}).objective;
  const auto r = run_gd(f, GdConfig{0.25, 200, std::nullopt}, make_point({1.0, 1.0}));
  ASSERT_EQ(r.size(), 201u);
  for (std::size_t k = 0; k < r.size(); ++k) {
    // Modes decay by (1 - gamma lambda)^k: 0.75^k and 0 after the first step.
    const double x0 = std::pow(0.75, static_cast<double>(k));
    const double x1 = k == 0 ? 1.0 : 0.0;
    EXPECT_NEAR(r.f_gaps[k], 0.5 * x0 * x0 + 2.0 * x1 * x1, 1e-15);
    EXPECT_LE(r.f_gaps[k], std::pow(1.0 - 1.0 / 4.0, static_cast<double>(k)) * r.f_gaps[0] * (1 + 1e-12));
  }
}

TEST(Gd, PlEnvelopeOnSineQuadratic) {
  const auto b = sine_quadratic_1d(5, 0.19, 5);
  GridSpec g;
  g.resolution_per_axis = 100000;
  const auto e = estimate_constants(b.objective, g);
  const auto r = run_gd(b.objective, GdConfig{1.0 / e.L_smooth, 2000, std::nullopt}, make_point({1.7}));
  for (std::size_t k = 0; k < r.size(); ++k)
    EXPECT_LE(r.f_gaps[k], std::pow(1.0 - e.mu_pl / e.L_smooth, static_cast<double>(k)) * r.f_gaps[0] * (1 + 1e-9));
}

TEST(Gd, PlAimingEnvelopeOnQuadratics) {
  for (const auto& lams : {std::vector<double>{1, 4}, std::vector<double>{0.5, 2, 3}}) {
    const auto b = quadratic_diag(lams);
    const double mu = b.analytic.at("mu"), L = b.analytic.at("L"), a = b.analytic.at("a");
    const auto r = run_gd(b.objective, GdConfig{1.0 / L, 300, std::nullopt}, Point::Constant(b.objective.dim(), 0.8));
    for (std::size_t k = 0; k < r.size(); ++k)
      EXPECT_LE(r.f_gaps[k], (1 + std::sqrt(L / mu)) * std::pow(1 - a * mu / L, static_cast<double>(k)) * r.f_gaps[0]);
  }
}

TEST(Gd, DivergenceIsFlaggedNotThrown) {
  const auto r = run_gd(scaled_square(1.0), GdConfig{3.0, 1000, std::nullopt}, make_point({1.0}));
  EXPECT_TRUE(r.diverged);
  EXPECT_LT(r.size(), 1001u);
}

TEST(Gd, RejectsBadInputs) {
  const auto f = scaled_square(1.0);
  EXPECT_THROW(run_gd(f, GdConfig{0.0, 10, std::nullopt}, make_point({1.0})), InvalidParamError);
  EXPECT_THROW(run_gd(f, GdConfig{0.1, 10, std::nullopt}, make_point({1.0, 2.0})), InvalidInputError);
  EXPECT_THROW(run_gd(f, GdConfig{0.1, 10, std::nullopt}, make_point({NAN})), InvalidInputError);
}

TEST(Gd, NoisyRunsAreSeedDeterministic) {
  const auto f = quadratic_diag({1, 4}).objective;
  const GdConfig c{0.125, 50, 3};
  const auto a = run_gd(f, c, make_point({1, 1}), NoiseModel::two_point(2.0));
  const auto b = run_gd(f, c, make_point({1, 1}), NoiseModel::two_point(2.0));
  EXPECT_TRUE(same_iterates(a, b));
  const auto d = run_gd(f, GdConfig{0.125, 50, 4}, make_point({1, 1}), NoiseModel::two_point(2.0));
  EXPECT_FALSE(same_iterates(a, d));
}

TEST(Gd, RecordLayout) {
  const auto f = quadratic_diag({1, 4}).objective;
  const auto r = run_gd(f, GdConfig{0.1, 20, std::nullopt}, make_point({0.5, 0.5}));
  ASSERT_EQ(r.size(), 21u);
  EXPECT_EQ(r.f_gaps.size(), r.grad_norms.size());
  EXPECT_EQ(r.times.size(), r.aiming_values.size());
  EXPECT_EQ(r.pl_values.size(), r.iterates.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    EXPECT_EQ(r.times[k], static_cast<double>(k));
    EXPECT_GE(r.f_gaps[k], 0.0);
    EXPECT_NEAR(r.aiming_values[k], pointwise_aiming(f, r.iterates[k]), 1e-15);
  }
}

TEST(HeavyBall, ZeroMomentumIsGradientDescent) {
  const auto f = sine_valley(1e-3).objective;
  const auto a = run_hb(f, HbConfig{0.0, 0.2, 300}, make_point({1.0, 2.0}));
  const auto b = run_gd(f, GdConfig{0.2, 300, std::nullopt}, make_point({1.0, 2.0}));
  EXPECT_TRUE(same_iterates(a, b));
}

TEST(HeavyBall, ScalarRecurrenceOracle) {
  const auto r = run_hb(scaled_square(1.0), HbConfig{0.9, 1.0, 200}, make_point({1.0}));
  double prev = 1.0, x = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double next = x + 0.9 * (x - prev) - x;
    prev = x;
    x = next;
  }
  EXPECT_NEAR(r.iterates.back()[0], x, 1e-15);
  EXPECT_LE(r.f_gaps[200], 1e-6);
}

TEST(HeavyBall, StationaryAtMinimizer) {
  const auto r = run_hb(quadratic_diag({1, 4}).objective, HbConfig{0.5, 0.1, 10}, Point::Zero(2));
  for (const auto& x : r.iterates) EXPECT_EQ(x.norm(), 0.0);
}

TEST(NmPrime, ZeroMomentumIsGradientDescent) {
  const auto f = valley_2d().objective;
  const auto a = run_nm_prime(f, NmPrimeConfig{0.0, 0.3, 400}, make_point({1.0, -1.0}));
  const auto b = run_gd(f, GdConfig{0.3, 400, std::nullopt}, make_point({1.0, -1.0}));
  EXPECT_TRUE(same_iterates(a, b));
  EXPECT_EQ(a.f_gaps, b.f_gaps);
}

TEST(NmPrime, ValleyEarlyNegativeAimingAndCatchUp) {
  const auto f = sine_valley(1e-3).objective;
  GridSpec g;
  g.resolution_per_axis = 1000;
  const double L = estimate_constants(f, g).L_smooth;
  const Point x0 = make_point({0.0, 3.0});
  const auto nm = run_nm_prime(f, NmPrimeConfig{0.9, 1.0 / L, 3000}, x0);
  const auto gd = run_gd(f, GdConfig{1.0 / L, 3000, std::nullopt}, x0);
  double early = 1.0;
  for (int k = 0; k < 100; ++k)
    if (!std::isnan(nm.aiming_values[k])) early = std::min(early, nm.aiming_values[k]);
  EXPECT_LT(early, 0.0);
  EXPECT_GT(nm.f_gaps[1000], gd.f_gaps[1000]);
  EXPECT_LE(nm.f_gaps[3000], 1.5 * gd.f_gaps[3000]);
}

TEST(NmPrime, DiagnosticsAtExtrapolatedPoint) {
  const auto f = quadratic_diag({1, 4}).objective;
  const auto r = run_nm_prime(f, NmPrimeConfig{0.5, 0.2, 5}, make_point({0.9, 0.4}));
  ASSERT_GE(r.size(), 3u);
  const Point y2 = r.iterates[2] + 0.5 * (r.iterates[2] - r.iterates[1]);
  EXPECT_TRUE((r.probes[2].array() == y2.array()).all());
  EXPECT_NEAR(r.aiming_values[2], pointwise_aiming(f, y2), 1e-15);
}

TEST(Continuized, CoefficientLimits) {
  const auto c = continuized_coefficients(1.0, 1.0, 1e-14);
  EXPECT_LT(c.alpha, 1e-13);
  EXPECT_LT(c.beta, 1e-13);
  const auto big = continuized_coefficients(1.0, 3.0, 50.0);
  EXPECT_NEAR(big.alpha, 0.25, 1e-15);
  EXPECT_NEAR(big.beta, 1.0, 1e-15);
}

TEST(Continuized, MeanAlphaMonteCarlo) {
  std::mt19937_64 rng(123);
  std::exponential_distribution<double> expo(1.0);
  const int n = 100000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double a = continuized_coefficients(1.0, 1.0, expo(rng)).alpha;
    s += a;
    s2 += a * a;
  }
  const double mean = s / n, sigma = std::sqrt((s2 / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - 1.0 / 3.0), 3.0 * sigma);
}

TEST(Continuized, ReducedRecursionMatchesScalarOracle) {
  // gamma' = 0, eta' = 0: x+ = y - gamma y, z stays at x0, y = x + alpha (z - x).
  const NmContinuizedConfig c{1.0, 0.0, 0.5, 0.0, 60, 5};
  const auto r = run_nm_continuized(scaled_square(1.0), c, make_point({1.0}));
  std::mt19937_64 gaps(5);
  double x = 1.0;
  const double z = 1.0;
  for (int k = 0; k < 60; ++k) {
    const double u = static_cast<double>(gaps() >> 11) * 0x1.0p-53;
    const double g = -std::log1p(-u);
    const double alpha = 1.0 - std::exp(-g);
    const double y = x + alpha * (z - x);
    x = y - 0.5 * y;
  }
  EXPECT_NEAR(r.iterates.back()[0], x, 1e-15);
  const NmContinuizedConfig conv{1.0, 0.0, 0.5, 0.0, 200, 1};
  EXPECT_LT(run_nm_continuized(scaled_square(1.0), conv, make_point({1.0})).f_gaps.back(), 0.5);
}

TEST(Continuized, TimesAreCumulativeGaps) {
  const NmContinuizedConfig c{1.0, 1.0, 0.1, 0.1, 30, 9};
  const auto r = run_nm_continuized(quadratic_diag({1, 4}).objective, c, make_point({0.5, 0.5}));
  std::mt19937_64 gaps(9);
  double t = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    EXPECT_NEAR(r.times[k], t, 1e-12);
    t += -std::log1p(-static_cast<double>(gaps() >> 11) * 0x1.0p-53);
  }
}

TEST(Continuized, DeterministicPerSeed) {
  const auto f = quadratic_diag({1, 4}).objective;
  const auto c = theorem_params_nm(1, 1, 4, 4, 0.8, 2.0, 100, 42);
  const auto a = run_nm_continuized(f, c, make_point({1, 1}), NoiseModel::two_point(2.0));
  const auto b = run_nm_continuized(f, c, make_point({1, 1}), NoiseModel::two_point(2.0));
  EXPECT_TRUE(same_iterates(a, b));
  EXPECT_EQ(a.times, b.times);
}

TEST(TheoremParams, Formulas) {
  auto c = theorem_params_nm(1, 1, 1, 1, 1);
  EXPECT_EQ(c.eta, 1.0);
  EXPECT_EQ(c.eta_prime, 1.0);
  EXPECT_EQ(c.gamma, 1.0);
  EXPECT_EQ(c.gamma_prime, 1.0);
  c = theorem_params_nm(1e-4, 1, 1, 1e3, 1);
  EXPECT_NEAR(c.eta_prime, std::sqrt(1e-7), 1e-18);
  EXPECT_NEAR(c.gamma, 1e-3, 1e-18);
  EXPECT_NEAR(c.gamma_prime, 1.0 / std::sqrt(1e3), 1e-15);
  EXPECT_NEAR(c.eta, c.gamma_prime, 1e-15);
  const auto half = theorem_params_nm(1e-4, 1, 1, 1e3, 1, 2.0);
  EXPECT_NEAR(half.eta, c.eta / 2, 1e-18);
  EXPECT_NEAR(half.eta_prime, c.eta_prime / 2, 1e-18);
  EXPECT_NEAR(half.gamma, c.gamma / 2, 1e-18);
  EXPECT_NEAR(half.gamma_prime, c.gamma_prime / 2, 1e-18);
  EXPECT_THROW(theorem_params_nm(2, 1, 1, 1, 1), InvalidParamError);
  EXPECT_THROW(theorem_params_nm(1, 1, 1, 1, 0), InvalidParamError);
  EXPECT_THROW(theorem_params_nm(1, 1, 1, 1, 1, 0.5), InvalidParamError);
}

TEST(DescentLemma, TwoOutcomeExpectationOnQuadratics) {
  for (const auto& lams : {std::vector<double>{1, 4}, std::vector<double>{0.3, 2, 5}}) {
    const auto b = quadratic_diag(lams);
    const auto& f = b.objective;
    const double L = b.analytic.at("L");
    std::mt19937_64 rng(8);
    for (double rho : {1.0, 2.0, 4.0}) {
      const double d = std::sqrt(rho - 1.0);
      for (int i = 0; i < 1000; ++i) {
        const Point x = f.domain().sample(rng);
        const Point g = f.grad(x);
        const double expect = 0.5 * (f.eval(x - (1 - d) * g / (rho * L)) + f.eval(x - (1 + d) * g / (rho * L)));
        EXPECT_LE(expect - f.eval(x), -g.squaredNorm() / (2 * rho * L) + 1e-14);
      }
    }
  }
}

TEST(Tuning, ScoreOrdering) {
  RunRecord fast, slow, stuck;
  fast.f_gaps = {1.0, 1e-14, 1e-15};
  slow.f_gaps = {1.0, 0.5, 1e-14};
  stuck.f_gaps = {1.0, 0.5, 0.4};
  for (auto* r : {&fast, &slow, &stuck}) r->iterates.resize(3);
  EXPECT_LT(score_run(fast, 2), score_run(slow, 2));
  EXPECT_LT(score_run(slow, 2), score_run(stuck, 2));
  RunRecord bad = stuck;
  bad.diverged = true;
  EXPECT_LT(score_run(stuck, 2), score_run(bad, 2));
}

TEST(Tuning, GdPicksBestStepOnQuadratic) {
  const auto f = quadratic_diag({1, 4}).objective;
  const auto res = tune_gd(f, make_point({1, 1}), {0.05, 0.1, 0.4, 0.6}, 200);
  EXPECT_EQ(res.best.gamma, 0.4);
  EXPECT_EQ(res.evaluated, 4u);
  const auto nmp = tune_nm_prime(f, make_point({1, 1}), {0.1, 0.4}, {0.0, 0.5}, 100);
  EXPECT_EQ(nmp.evaluated, 4u);
  const auto nm = tune_nm(f, make_point({1, 1}), NmGrid{{0.5}, {0.5}, {0.1, 0.4}, {0.1}}, 100, 0);
  EXPECT_EQ(nm.evaluated, 2u);
  EXPECT_EQ(nm.record.size(), 101u);
}

TEST(Tuning, Logspace) {
  const auto v = logspace(1e-3, 1.0, 4);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[0], 1e-3, 1e-18);
  EXPECT_NEAR(v[1], 1e-2, 1e-17);
  EXPECT_NEAR(v[3], 1.0, 1e-15);
}

TEST(Csv, RunHeaderAndRows) {
  const auto r = run_gd(quadratic_diag({1, 4}).objective, GdConfig{0.1, 3, std::nullopt}, make_point({0.5, 0.5}));
  std::ostringstream os;
  write_run_csv(os, r);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,time,f_gap,grad_norm,aiming,pl_pointwise");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
