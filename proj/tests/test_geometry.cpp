#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "plaim/geometry.hpp"
#include "plaim/testbed.hpp"

using namespace plaim;

namespace {

GridSpec grid(int res) {
  GridSpec g;
  g.resolution_per_axis = res;
  return g;
}

// Brute-force 1-D scan used as an independent oracle for the estimators.
struct Scan1d {
  double pl_min = INFINITY, curv_max = 0, qg_min = INFINITY, qg_max = 0;
};

Scan1d scan_sine_quadratic(double A, double b, double c, double hw, int n) {
  Scan1d s;
  const double excl = 2.0 * (2 * hw) / n;
  for (int i = 0; i < n; ++i) {
    const double u = -hw + 2 * hw * i / (n - 1);
    const double in = u + b * std::sin(c * u);
    const double d1 = 1 + b * c * std::cos(c * u);
    const double d2 = -b * c * c * std::sin(c * u);
    const double f = A * in * in;
    const double fp = 2 * A * in * d1;
    const double fpp = 2 * A * (d1 * d1 + in * d2);
    s.curv_max = std::max(s.curv_max, std::abs(fpp));
    if (std::abs(u) <= excl) continue;
    s.pl_min = std::min(s.pl_min, fp * fp / (2 * f));
    s.qg_min = std::min(s.qg_min, 2 * f / (u * u));
    s.qg_max = std::max(s.qg_max, 2 * f / (u * u));
  }
  return s;
}

}  // namespace

TEST(Pointwise, QuadraticValues) {
  const Objective f("q", Box::cube(1, -1, 1), [](const Point& x) { return 0.5 * 3.0 * x[0] * x[0]; },
                    [](const Point& x) { return Point(3.0 * x); }, 0.0, Point::Zero(1));
  for (double u : {-0.7, 0.01, 0.9}) EXPECT_NEAR(pointwise_pl(f, make_point({u})), 3.0, 1e-12);
  const auto q = quadratic_diag({1, 4}).objective;
  EXPECT_NEAR(pointwise_pl(q, make_point({0, 0.5})), 4.0, 1e-12);
  EXPECT_NEAR(pointwise_aiming(q, make_point({1, 1})), 5.0 / (std::sqrt(17.0) * std::sqrt(2.0)), 1e-12);
  EXPECT_NEAR(pointwise_aiming(q, make_point({0.3, 0})), 1.0, 1e-15);
  EXPECT_NEAR(pointwise_qg(q, make_point({0.5, 0})), 1.0, 1e-15);
}

TEST(Pointwise, OneDimensionalAimingIsOne) {
  const auto f = sine_quadratic_1d(5, 0.19, 5).objective;
  for (double u : {-1.9, -0.4, 0.2, 1.3}) EXPECT_NEAR(pointwise_aiming(f, make_point({u})), 1.0, 1e-15);
}

TEST(Pointwise, DegenerateInputsThrow) {
  const auto q = quadratic_diag({1, 4}).objective;
  EXPECT_THROW(pointwise_pl(q, Point::Zero(2)), NearOptimumError);
  EXPECT_THROW(pointwise_aiming(q, Point::Zero(2)), DegeneratePointError);
  EXPECT_THROW(pointwise_qg(q, Point::Zero(2)), DegeneratePointError);
}

TEST(Estimate, QuadraticRecoversEigenvalues) {
  const auto b = quadratic_diag({1, 4});
  const auto e = estimate_constants(b.objective, grid(300));
  EXPECT_NEAR(e.mu_pl, 1.0, 1e-2);
  EXPECT_NEAR(e.L_smooth, 4.0, 1e-2);
  EXPECT_NEAR(e.mu0_qg, 1.0, 1e-2);
  EXPECT_NEAR(e.L0_qg, 4.0, 1e-2);
  EXPECT_NEAR(e.a_aim, 0.8, 1e-2);
  EXPECT_EQ(e.grid_points, 300LL * 300LL);
  EXPECT_EQ(e.witnesses.size(), 5u);
}

TEST(Estimate, SineQuadraticMatchesBruteForceScan) {
  const int n = 100000;
  const auto e = estimate_constants(sine_quadratic_1d(5, 0.19, 5).objective, grid(n));
  const auto s = scan_sine_quadratic(5, 0.19, 5, 2.0, n);
  EXPECT_NEAR(e.mu_pl, s.pl_min, 1e-9 * s.pl_min);
  EXPECT_NEAR(e.L_smooth, s.curv_max, 1e-4 * s.curv_max);
  EXPECT_NEAR(e.mu0_qg, s.qg_min, 1e-9 * s.qg_min);
  EXPECT_NEAR(e.L0_qg, s.qg_max, 1e-9 * s.qg_max);
  EXPECT_NEAR(e.mu_pl / e.L_smooth, 3.2e-4, 0.25 * 3.2e-4);
  EXPECT_EQ(e.a_aim, 1.0);
}

TEST(Estimate, WideSineQuadraticConstants) {
  const auto e = estimate_constants(sine_quadratic_1d(2.5, 0.07, 13, 10).objective, grid(100000));
  EXPECT_NEAR(e.mu_pl, 4e-2, 0.3 * 4e-2);
  EXPECT_NEAR(e.L_smooth, 6e2, 0.3 * 6e2);
  EXPECT_NEAR(e.mu0_qg, 3.0, 0.3 * 3.0);
  EXPECT_NEAR(e.L0_qg, 18.0, 0.3 * 18.0);
}

TEST(Estimate, MonotoneUnderRefinement) {
  // Resolution 2n-1 with endpoints contains every point of resolution n.
  for (const auto& b : {sine_quadratic_1d(5, 0.19, 5), valley_2d()}) {
    const auto coarse = estimate_constants(b.objective, grid(101));
    const auto fine = estimate_constants(b.objective, grid(201));
    EXPECT_LE(fine.mu_pl, coarse.mu_pl) << b.objective.name();
    EXPECT_LE(fine.a_aim, coarse.a_aim) << b.objective.name();
    EXPECT_GE(fine.L_smooth, coarse.L_smooth) << b.objective.name();
  }
}

TEST(Estimate, ClassInclusions) {
  for (const auto& b : {sine_quadratic_1d(5, 0.19, 5), valley_2d(), sine_valley(1e-3), quadratic_diag({1, 4}),
                        radial_sqc(10, 42)}) {
    const auto e = estimate_constants(b.objective, grid(b.objective.dim() == 1 ? 10000 : 300));
    const double tol = 1e-2 * e.L_smooth;
    EXPECT_GT(e.mu_pl, 0.0);
    EXPECT_LE(e.mu_pl, e.L_smooth);
    EXPECT_LE(e.mu0_qg, e.L0_qg);
    EXPECT_LE(e.mu_pl, e.mu0_qg + tol) << b.objective.name();
    EXPECT_LE(e.L0_qg, e.L_smooth + tol) << b.objective.name();
    EXPECT_GE(e.a_aim, -1.0);
    EXPECT_LE(e.a_aim, 1.0);
  }
}

TEST(Estimate, DeterministicAcrossWorkerCounts) {
  const auto f = valley_2d().objective;
  setenv("PLAIM_THREADS", "1", 1);
  const auto a = estimate_constants(f, grid(200));
  setenv("PLAIM_THREADS", "3", 1);
  const auto b = estimate_constants(f, grid(200));
  unsetenv("PLAIM_THREADS");
  EXPECT_EQ(a.mu_pl, b.mu_pl);
  EXPECT_EQ(a.L_smooth, b.L_smooth);
  EXPECT_EQ(a.a_aim, b.a_aim);
  EXPECT_TRUE((a.witnesses.at("mu_pl").array() == b.witnesses.at("mu_pl").array()).all());
}

TEST(Estimate, GuardsAndErrors) {
  EXPECT_THROW(estimate_constants(quadratic_diag({1, 2, 3}).objective, grid(1000)), InvalidParamError);
  const Objective no_min("free", Box::cube(1, -1, 1), [](const Point& x) { return x[0]; },
                         [](const Point&) { return make_point({1.0}); });
  EXPECT_THROW(estimate_constants(no_min, grid(100)), MissingConstantError);
  GridSpec huge = grid(100);
  huge.exclusion_radius = 10.0;
  EXPECT_THROW(estimate_constants(quadratic_diag({1}).objective, huge), EstimationError);
}

TEST(Estimate, SampledModeInHighDimension) {
  const auto b = quadratic_diag({1, 2, 3, 5});
  GridSpec g;
  g.samples = 1000;
  const auto e = estimate_constants(b.objective, g);
  EXPECT_NEAR(e.L_smooth, 5.0, 1e-3);
  EXPECT_GE(e.mu_pl, 1.0 - 1e-9);
  EXPECT_EQ(e.grid_points, 1000);
}

TEST(SqcSweep, StronglyConvexAtTauOne) {
  const auto s = sqc_sweep(quadratic_diag({1, 4}).objective, grid(301), {0.5, 1.0});
  EXPECT_NEAR(s.mus[1], 1.0, 1e-2);
  EXPECT_GT(s.mus[0], s.mus[1]);
}

TEST(SqcSweep, SineQuadraticInadmissibleAboveCutoff) {
  const auto f = sine_quadratic_1d(5, 0.19, 5).objective;
  const auto taus = linspace(1e-5, 0.1, 1000);
  const auto s = sqc_sweep(f, grid(100000), taus);
  for (std::size_t j = 0; j < taus.size(); ++j)
    if (taus[j] >= 0.1) {
      EXPECT_LE(s.mus[j], 0.0);
    }
  EXPECT_GT(s.mus.front(), 0.0);
  const double cutoff = sqc_admissibility_cutoff(f, grid(100000));
  EXPECT_NEAR(cutoff, 0.1, 0.02);
  for (std::size_t j = 0; j < taus.size(); ++j) EXPECT_EQ(s.mus[j] > 0.0, taus[j] < cutoff) << taus[j];
}

TEST(SqcSweep, MatchesBruteForce) {
  const auto f = sine_quadratic_1d(5, 0.19, 5).objective;
  const int n = 2001;
  const double tau = 0.03;
  const auto s = sqc_sweep(f, grid(n), {tau});
  double best = INFINITY;
  for (int i = 0; i < n; ++i) {
    const double u = -2.0 + 4.0 * i / (n - 1);
    if (std::abs(u) <= 2.0 * 4.0 / n) continue;
    const double in = u + 0.19 * std::sin(5 * u);
    const double fp = 10 * in * (1 + 0.95 * std::cos(5 * u));
    best = std::min(best, 2 * (fp * u / tau - 5 * in * in) / (u * u));
  }
  EXPECT_NEAR(s.mus[0], best, 1e-9 * std::abs(best));
}

TEST(SqcSweep, ScalingLaw) {
  const auto f = sine_quadratic_1d(5, 0.19, 5).objective;
  const auto taus = linspace(0.005, 0.09, 18);
  const auto s = sqc_sweep(f, grid(20001), taus);
  for (double theta : {0.25, 0.5, 0.9}) {
    std::vector<double> scaled;
    for (double t : taus) scaled.push_back(theta * t);
    const auto s2 = sqc_sweep(f, grid(20001), scaled);
    for (std::size_t j = 0; j < taus.size(); ++j)
      if (s.mus[j] > 0) {
        EXPECT_GE(s2.mus[j], s.mus[j] / theta - 1e-9 * std::abs(s.mus[j] / theta));
      }
  }
}

TEST(SqcSweep, HalvingTauNeverLowersMu) {
  const auto f = valley_2d().objective;
  const auto taus = linspace(0.01, 1.0, 20);
  std::vector<double> halves;
  for (double t : taus) halves.push_back(t / 2);
  const auto a = sqc_sweep(f, grid(201), taus), b = sqc_sweep(f, grid(201), halves);
  for (std::size_t j = 0; j < taus.size(); ++j) EXPECT_GE(b.mus[j], a.mus[j]);
}

TEST(SqcSweep, RejectsBadTaus) {
  const auto f = quadratic_diag({1}).objective;
  EXPECT_THROW(sqc_sweep(f, grid(100), {0.5, 0.4}), InvalidParamError);
  EXPECT_THROW(sqc_sweep(f, grid(100), {0.0}), InvalidParamError);
  EXPECT_THROW(sqc_sweep(f, grid(100), {1.5}), InvalidParamError);
}

TEST(RateTable, CellFormulas) {
  RateConstants c;
  c.mu = 1e-4;
  c.L = 1e3;
  EXPECT_NEAR(rate_entry(FunctionClass::PL, Algorithm::GD, c).rate, 1e-7, 1e-20);
  RateConstants s;
  s.L = 4.0;
  s.sweep = SqcSweep{{0.5}, {1.0}};
  EXPECT_NEAR(rate_entry(FunctionClass::SQC, Algorithm::NM, s).rate, 0.25, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::SQC, Algorithm::GD, s).rate, 0.125, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::SQC, Algorithm::GF, s).rate, 0.5, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::SQC, Algorithm::NMO, s).rate, 0.5, 1e-15);
  RateConstants sc;
  sc.sc_mu = 0.04;
  sc.L = 4;
  EXPECT_NEAR(rate_entry(FunctionClass::SC, Algorithm::NMO, sc).rate, 0.2, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::SC, Algorithm::NM, sc).rate, 0.1, 1e-15);
  RateConstants pa{0.01, 4.0, 1.0, 4.0, 0.5, std::nullopt, std::nullopt, std::nullopt};
  EXPECT_NEAR(rate_entry(FunctionClass::PL_AC, Algorithm::GF, pa).rate, 0.5 * 0.1, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::PL_AC, Algorithm::NMO, pa).rate, 0.5 * std::pow(0.25, 0.25) * 0.1, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::PL_AC, Algorithm::GD, pa).rate, 0.5 * 0.1 / 4, 1e-15);
  EXPECT_NEAR(rate_entry(FunctionClass::PL_AC, Algorithm::NM, pa).rate, 0.5 * std::pow(0.25, 0.25) * 0.05, 1e-15);
}

TEST(RateTable, PlMomentumFlowUndefinedUnlessGammaGiven) {
  RateConstants c;
  c.mu = 0.5;
  EXPECT_FALSE(rate_entry(FunctionClass::PL, Algorithm::NMO, c).defined);
  c.nmo_gamma = 3.0;
  const auto e = rate_entry(FunctionClass::PL, Algorithm::NMO, c);
  EXPECT_TRUE(e.defined);
  EXPECT_NEAR(e.rate, 3.0, 1e-15);
}

TEST(RateTable, MissingConstantsThrow) {
  RateConstants c;
  EXPECT_THROW(rate_entry(FunctionClass::PL, Algorithm::GD, c), MissingConstantError);
  EXPECT_THROW(rate_entry(FunctionClass::SQC, Algorithm::GD, c), MissingConstantError);
  c.mu = 1.0;
  EXPECT_THROW(rate_entry(FunctionClass::PL_AC, Algorithm::GF, c), MissingConstantError);
}

TEST(RateTable, SineQuadraticOptimalTauDiffersBetweenMethods) {
  const auto f = sine_quadratic_1d(5, 0.19, 5).objective;
  const auto e = estimate_constants(f, grid(100000));
  const auto s = sqc_sweep(f, grid(100000), linspace(1e-5, 0.1, 1000));
  const auto c = RateConstants::from(e);
  EXPECT_NE(sqc_best(s, Algorithm::GD, c).first, sqc_best(s, Algorithm::NM, c).first);
  EXPECT_NE(sqc_best(s, Algorithm::GF, c).first, sqc_best(s, Algorithm::NMO, c).first);
  RateConstants cs = c;
  cs.sweep = s;
  const auto t = rate_table(cs, {{FunctionClass::SQC, Algorithm::GD}, {FunctionClass::SQC, Algorithm::NM}});
  EXPECT_NEAR(t[0].rate, 1.3e-2, 0.25 * 1.3e-2);
  EXPECT_NEAR(t[1].rate, 1.8e-2, 0.25 * 1.8e-2);
}

TEST(Acceleration, Thresholds) {
  GeometryEstimate e;
  e.mu_pl = e.mu0_qg = e.L0_qg = e.L_smooth = e.a_aim = 1.0;
  auto v = acceleration_predicate(e, AccelerationMode::discrete);
  EXPECT_NEAR(v.threshold, 1.0, 1e-15);
  EXPECT_TRUE(v.accelerates);
  EXPECT_FALSE(v.flatness_ok.has_value());
  e.mu_pl = 1e-4;
  e.L_smooth = 1e3;
  e.a_aim = 1e-4;
  v = acceleration_predicate(e, AccelerationMode::discrete);
  EXPECT_NEAR(v.threshold, 3.1622776601683795e-4, 1e-15);
  EXPECT_FALSE(v.accelerates);
  GeometryEstimate flat;
  flat.mu_pl = 1.0;
  flat.mu0_qg = 2.0;
  flat.L0_qg = 3.0;
  flat.L_smooth = 3.0;
  flat.a_aim = 1.0;
  v = acceleration_predicate(flat, AccelerationMode::continuous);
  ASSERT_TRUE(v.flatness_ok.has_value());
  EXPECT_FALSE(*v.flatness_ok);
  EXPECT_NEAR(v.threshold, std::pow(1.5, 0.25), 1e-15);
}

TEST(Conversions, PlAimingToSqc) {
  auto p = sqc_from_pl_ac(1, 1, 1, 1);
  EXPECT_EQ(p.tau, 1.0);
  EXPECT_EQ(p.mu_sqc, 1.0);
  p = sqc_from_pl_ac(0.01, 1, 4, 0.5);
  EXPECT_NEAR(p.tau, 0.025, 1e-15);
  EXPECT_NEAR(p.mu_sqc, 2.0, 1e-15);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double mu0 = u(rng), mu = mu0 * u(rng), L0 = mu0 + u(rng), a = u(rng);
    const auto q = sqc_from_pl_ac(mu, mu0, L0, a);
    EXPECT_NEAR(q.tau * q.mu_sqc, a * std::sqrt(mu * mu0), 1e-12);
  }
  EXPECT_THROW(sqc_from_pl_ac(1, 1, 1, 1.5), InvalidParamError);
}

TEST(Conversions, UniformAimingToSqc) {
  EXPECT_NEAR(sqc_from_uaac(1, 2, 1, 0.5), 1.0, 1e-15);
  EXPECT_THROW(sqc_from_uaac(1, 2, 1, 1.0), InvalidParamError);
  const double mu = 0.3, L = 2.0, a = 0.7, cap = 2 * mu * a / L;
  for (double frac : {0.9, 0.99, 0.999}) {
    const double tau = frac * cap;
    const double m = sqc_from_uaac(mu, L, a, tau);
    EXPECT_GT(m, 0.0);
    EXPECT_LE(tau * std::sqrt(m / L), (1 + 1e-12) * a * mu / L);
  }
}

TEST(Conversions, RestrictedSecantToAiming) {
  EXPECT_EQ(rsi_to_ac(1, 2), 0.5);
  EXPECT_EQ(rsi_to_ac(3, 3), 1.0);
  EXPECT_THROW(rsi_to_ac(3, 2), InvalidParamError);
  EXPECT_LE(rsi_to_ac(1, 4), quadratic_diag({1, 4}).analytic.at("a"));
}

TEST(Export, JsonRecords) {
  const auto e = estimate_constants(quadratic_diag({1, 4}).objective, grid(50));
  const auto j = estimate_to_json(e);
  ASSERT_EQ(j.size(), 5u);
  EXPECT_EQ(j[0]["constant"], "mu_pl");
  EXPECT_EQ(j[0]["grid_resolution"], 50);
  EXPECT_EQ(j[1]["witness"].size(), 2u);
  EXPECT_DOUBLE_EQ(j[4]["value"].get<double>(), e.a_aim);
}
