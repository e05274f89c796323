// SPDX-License-Identifier: Apache-2.0
#ifndef PLAIM_EXPERIMENTS_HPP
#define PLAIM_EXPERIMENTS_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "plaim/flow.hpp"
#include "plaim/geometry.hpp"
#include "plaim/objective.hpp"
#include "plaim/optim.hpp"
#include "plaim/testbed.hpp"
#include "plaim/trajectory.hpp"

namespace plaim {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"fig1-table",      "fig2-sweep",    "fig4-valley", "fig5-bounds",
                                              "fig7-sweep-cont", "hard-instance", "envelopes",   "lemma-suite"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  long long grid_resolution = 100000;
  std::filesystem::path out_dir = "plaim-out";
  nlohmann::json overrides = nlohmann::json::object();

  double number(const std::string& key, double fallback) const {
    if (!overrides.contains(key)) return fallback;
    const auto& v = overrides.at(key);
    if (!v.is_number()) throw ConfigError("override '" + key + "' must be a number");
    return v.get<double>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!overrides.contains(key)) return fallback;
    const auto& v = overrides.at(key);
    if (!v.is_array()) throw ConfigError("override '" + key + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError("override '" + key + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  void validate() const {
    if (grid_resolution < 100) throw ConfigError("grid_resolution must be >= 100");
  }
};

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses a JSON configuration. Missing fields keep their defaults.
inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte);
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line, col);
  }
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object", 1, 1);
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment") {
      if (!value.is_string()) throw ConfigError("experiment must be a string");
      cfg.experiment = value.get<std::string>();
    } else if (key == "seed") {
      if (!value.is_number_integer() || value.get<long long>() < 0) throw ConfigError("seed must be a nonnegative integer");
      cfg.seed = value.get<std::uint64_t>();
    } else if (key == "grid_resolution") {
      if (!value.is_number()) throw ConfigError("grid_resolution must be a number");
      const double r = value.get<double>();
      if (r != std::floor(r)) throw ConfigError("grid_resolution must be an integer");
      cfg.grid_resolution = static_cast<long long>(r);
    } else if (key == "out_dir") {
      if (!value.is_string()) throw ConfigError("out_dir must be a string");
      cfg.out_dir = value.get<std::string>();
    } else if (key == "overrides") {
      if (!value.is_object()) throw ConfigError("overrides must be an object");
      cfg.overrides = value;
    } else {
      throw ConfigError("unknown configuration key '" + key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read configuration file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Files keyed by name relative to the output directory, a summary and the --check verdicts.
struct ExperimentOutput {
  std::map<std::string, std::string> files;
  std::ostringstream summary;
  std::vector<CheckLine> checks;
  double seconds = 0.0;

  void check(const std::string& name, bool pass, const std::string& detail) { checks.push_back({name, pass, detail}); }
  bool all_pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckLine& c) { return c.pass; });
  }
};

namespace detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline bool within_rel(double value, double target, double tol) { return std::abs(value - target) <= tol * std::abs(target); }

inline std::string rel_detail(double value, double target) {
  return "got " + num(value) + ", reference " + num(target) + " (" + num(100.0 * (value - target) / target) + "%)";
}

inline GridSpec grid_1d(const ExperimentConfig& cfg) {
  GridSpec g;
  g.resolution_per_axis = static_cast<int>(cfg.grid_resolution);
  return g;
}

inline GridSpec grid_2d(const ExperimentConfig& cfg) {
  GridSpec g;
  g.resolution_per_axis = static_cast<int>(std::llround(std::sqrt(cfg.number("grid_resolution_2d", 1e6))));
  return g;
}

inline std::string constants_csv(const GeometryEstimate& e) {
  std::ostringstream os;
  const int d = static_cast<int>(e.witnesses.begin()->second.size());
  os << "name,value";
  for (int i = 1; i <= d; ++i) os << ",witness" << i;
  os << '\n';
  const std::pair<const char*, double> rows[] = {
      {"mu_pl", e.mu_pl}, {"L_smooth", e.L_smooth}, {"mu0_qg", e.mu0_qg}, {"L0_qg", e.L0_qg}, {"a_aim", e.a_aim}};
  for (const auto& [name, value] : rows) {
    os << name << ',';
    put_number(os, value);
    for (int i = 0; i < d; ++i) {
      os << ',';
      put_number(os, e.witnesses.at(name)[i]);
    }
    os << '\n';
  }
  return os.str();
}

inline std::string sweep_csv(const SqcSweep& s, double L, bool continuous) {
  std::ostringstream os;
  os << (continuous ? "tau,mu,rate_gf,rate_nmo\n" : "tau,mu,rate_gd,rate_nm\n");
  for (std::size_t j = 0; j < s.taus.size(); ++j) {
    const double tau = s.taus[j], mu = s.mus[j];
    const double scale = continuous ? 1.0 : L;
    const double r1 = mu > 0.0 ? tau * mu / scale : 0.0;
    const double r2 = mu > 0.0 ? tau * std::sqrt(mu / scale) : 0.0;
    put_number(os, tau);
    os << ',';
    put_number(os, mu);
    os << ',';
    put_number(os, r1);
    os << ',';
    put_number(os, r2);
    os << '\n';
  }
  return os.str();
}

inline std::string run_csv(const RunRecord& r) {
  std::ostringstream os;
  write_run_csv(os, r);
  return os.str();
}

/// Fitting window for runs that bottom out: from 10% up to the last iterate above floor_rel * gap0.
inline std::pair<std::size_t, std::size_t> floor_window(const RunRecord& r, double floor_rel = 1e-13) {
  std::size_t last = 0;
  for (std::size_t i = 0; i < r.size(); ++i)
    if (r.f_gaps[i] > floor_rel * r.f_gaps.front()) last = i;
  return {last / 10, last + 1};
}

}  // namespace detail

/// Reference values used by --check.
namespace reference {
inline constexpr double fig1_pl_gd_1d = 3.2e-4, fig1_sqc_gd_1d = 1.3e-2, fig1_sqc_nm_1d = 1.8e-2;
inline constexpr double fig1_pl_gd_2d = 1.6e-2, fig1_sqc_gd_2d = 7.7e-5, fig1_sqc_nm_2d = 1.8e-4;
inline constexpr double fig1_tolerance = 0.25;
inline constexpr double valley_aiming = 3e-4;
inline constexpr double fig5_mu = 4e-2, fig5_L = 6e2, fig5_mu0 = 3.0, fig5_L0 = 18.0;
inline constexpr double fig5_mu0_over_L0 = 0.2, fig5_mu_over_L = 7e-5, fig5_tolerance = 0.30;
inline constexpr double sqc_cutoff = 0.1, sqc_cutoff_tolerance = 0.20;
}  // namespace reference

struct Fig1Numbers {
  GeometryEstimate est_1d, est_2d;
  SqcSweep sweep_1d, sweep_2d;
  double pl_gd_1d, sqc_gd_1d, sqc_nm_1d, pl_gd_2d, sqc_gd_2d, sqc_nm_2d;
};

inline Fig1Numbers fig1_numbers(const ExperimentConfig& cfg) {
  Fig1Numbers n;
  const auto taus = linspace(1e-5, 0.1, static_cast<int>(cfg.number("tau_count", 1000)));
  const auto f1 = sine_quadratic_1d(5.0, 0.19, 5.0);
  const GridSpec g1 = detail::grid_1d(cfg);
  n.est_1d = estimate_constants(f1.objective, g1);
  n.sweep_1d = sqc_sweep(f1.objective, g1, taus);
  const auto f2 = valley_2d();
  const GridSpec g2 = detail::grid_2d(cfg);
  n.est_2d = estimate_constants(f2.objective, g2);
  n.sweep_2d = sqc_sweep(f2.objective, g2, taus);
  auto row = [](const GeometryEstimate& e, const SqcSweep& s, double& pl, double& gd, double& nm) {
    RateConstants c = RateConstants::from(e);
    c.sweep = s;
    const auto t = rate_table(c, {{FunctionClass::PL, Algorithm::GD},
                                  {FunctionClass::SQC, Algorithm::GD},
                                  {FunctionClass::SQC, Algorithm::NM}});
    pl = t[0].rate;
    gd = t[1].rate;
    nm = t[2].rate;
  };
  row(n.est_1d, n.sweep_1d, n.pl_gd_1d, n.sqc_gd_1d, n.sqc_nm_1d);
  row(n.est_2d, n.sweep_2d, n.pl_gd_2d, n.sqc_gd_2d, n.sqc_nm_2d);
  return n;
}

inline void run_fig1(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto n = fig1_numbers(cfg);
  out.files["constants_1d.csv"] = detail::constants_csv(n.est_1d);
  out.files["constants_2d.csv"] = detail::constants_csv(n.est_2d);
  out.files["constants.json"] =
      nlohmann::json{{"sine_quadratic", estimate_to_json(n.est_1d)}, {"valley_2d", estimate_to_json(n.est_2d)}}.dump(2) + "\n";
  out.files["sweep_1d.csv"] = detail::sweep_csv(n.sweep_1d, n.est_1d.L_smooth, false);
  out.files["sweep_2d.csv"] = detail::sweep_csv(n.sweep_2d, n.est_2d.L_smooth, false);
  auto& s = out.summary;
  s << "function,class,algorithm,rate\n";
  s << "sine-quadratic,PL,GD," << detail::num(n.pl_gd_1d) << "\n";
  s << "sine-quadratic,SQC,GD," << detail::num(n.sqc_gd_1d) << "\n";
  s << "sine-quadratic,SQC,NM," << detail::num(n.sqc_nm_1d) << "\n";
  s << "valley-2d,PL,GD," << detail::num(n.pl_gd_2d) << "\n";
  s << "valley-2d,SQC,GD," << detail::num(n.sqc_gd_2d) << "\n";
  s << "valley-2d,SQC,NM," << detail::num(n.sqc_nm_2d) << "\n";
  s << "valley-2d aiming a = " << detail::num(n.est_2d.a_aim) << "\n";
  s << "sine-quadratic mu = " << detail::num(n.est_1d.mu_pl) << ", L = " << detail::num(n.est_1d.L_smooth) << "\n";
  s << "valley-2d mu = " << detail::num(n.est_2d.mu_pl) << ", L = " << detail::num(n.est_2d.L_smooth) << "\n";
  namespace R = reference;
  const std::pair<const char*, std::pair<double, double>> cells[] = {
      {"1d PL GD", {n.pl_gd_1d, R::fig1_pl_gd_1d}},   {"1d SQC GD", {n.sqc_gd_1d, R::fig1_sqc_gd_1d}},
      {"1d SQC NM", {n.sqc_nm_1d, R::fig1_sqc_nm_1d}}, {"2d PL GD", {n.pl_gd_2d, R::fig1_pl_gd_2d}},
      {"2d SQC GD", {n.sqc_gd_2d, R::fig1_sqc_gd_2d}}, {"2d SQC NM", {n.sqc_nm_2d, R::fig1_sqc_nm_2d}}};
  for (const auto& [name, vt] : cells)
    out.check(std::string("table ") + name, detail::within_rel(vt.first, vt.second, R::fig1_tolerance),
              detail::rel_detail(vt.first, vt.second));
  const double ratio = n.est_2d.a_aim / R::valley_aiming;
  out.check("valley aiming within factor 2", ratio >= 0.5 && ratio <= 2.0, detail::rel_detail(n.est_2d.a_aim, R::valley_aiming));
}

struct SweepNumbers {
  SqcSweep sweep;
  double L = 0.0;
  int argmax_gd = -1, argmax_nm = -1, argmax_gf = -1, argmax_nmo = -1;
  double cutoff = 0.0;
};

inline SweepNumbers sweep_numbers(const ExperimentConfig& cfg) {
  SweepNumbers n;
  const auto f = sine_quadratic_1d(5.0, 0.19, 5.0);
  const GridSpec g = detail::grid_1d(cfg);
  const GeometryEstimate e = estimate_constants(f.objective, g);
  n.L = e.L_smooth;
  n.sweep = sqc_sweep(f.objective, g, linspace(1e-5, 0.1, static_cast<int>(cfg.number("tau_count", 1000))));
  RateConstants c = RateConstants::from(e);
  n.argmax_gd = sqc_best(n.sweep, Algorithm::GD, c).first;
  n.argmax_nm = sqc_best(n.sweep, Algorithm::NM, c).first;
  n.argmax_gf = sqc_best(n.sweep, Algorithm::GF, c).first;
  n.argmax_nmo = sqc_best(n.sweep, Algorithm::NMO, c).first;
  n.cutoff = sqc_admissibility_cutoff(f.objective, g);
  return n;
}

inline void run_sweep(const ExperimentConfig& cfg, ExperimentOutput& out, bool continuous) {
  const auto n = sweep_numbers(cfg);
  out.files["sweep.csv"] = detail::sweep_csv(n.sweep, n.L, continuous);
  const int i1 = continuous ? n.argmax_gf : n.argmax_gd;
  const int i2 = continuous ? n.argmax_nmo : n.argmax_nm;
  const char* a1 = continuous ? "GF" : "GD";
  const char* a2 = continuous ? "NMO" : "NM";
  auto tau_at = [&](int i) { return i >= 0 ? n.sweep.taus[static_cast<std::size_t>(i)] : 0.0; };
  out.summary << "L = " << detail::num(n.L) << "\n";
  out.summary << "argmax tau " << a1 << " = " << detail::num(tau_at(i1)) << "\n";
  out.summary << "argmax tau " << a2 << " = " << detail::num(tau_at(i2)) << "\n";
  out.summary << "admissibility cutoff tau = " << detail::num(n.cutoff) << "\n";
  out.check(std::string("argmax tau differs between ") + a1 + " and " + a2, i1 >= 0 && i2 >= 0 && i1 != i2,
            detail::num(tau_at(i1)) + " vs " + detail::num(tau_at(i2)));
  out.check("admissibility cutoff", detail::within_rel(n.cutoff, reference::sqc_cutoff, reference::sqc_cutoff_tolerance),
            detail::rel_detail(n.cutoff, reference::sqc_cutoff));
}

struct Fig5Numbers {
  GeometryEstimate est;
  double half_width = 10.0;
};

inline Fig5Numbers fig5_numbers(const ExperimentConfig& cfg) {
  Fig5Numbers n;
  n.half_width = cfg.number("fig5_half_width", 10.0);
  const auto f = sine_quadratic_1d(2.5, 0.07, 13.0, n.half_width);
  n.est = estimate_constants(f.objective, detail::grid_1d(cfg));
  return n;
}

inline void run_fig5(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto n = fig5_numbers(cfg);
  const auto& e = n.est;
  out.files["constants.csv"] = detail::constants_csv(e);
  out.files["constants.json"] = estimate_to_json(e).dump(2) + "\n";
  const auto f = sine_quadratic_1d(2.5, 0.07, 13.0, n.half_width);
  std::ostringstream curves;
  curves << "t,f,lower,upper\n";
  for (double t : linspace(-n.half_width, n.half_width, 2001)) {
    detail::put_number(curves, t);
    curves << ',';
    detail::put_number(curves, f.objective.eval(make_point({t})));
    curves << ',';
    detail::put_number(curves, 0.5 * e.mu0_qg * t * t);
    curves << ',';
    detail::put_number(curves, 0.5 * e.L0_qg * t * t);
    curves << '\n';
  }
  out.files["bounds.csv"] = curves.str();
  out.summary << "domain = [" << detail::num(-n.half_width) << ", " << detail::num(n.half_width) << "]\n";
  out.summary << "mu = " << detail::num(e.mu_pl) << "\nL = " << detail::num(e.L_smooth) << "\nmu0 = " << detail::num(e.mu0_qg)
              << "\nL0 = " << detail::num(e.L0_qg) << "\nmu0/L0 = " << detail::num(e.mu0_qg / e.L0_qg)
              << "\nmu/L = " << detail::num(e.mu_pl / e.L_smooth) << "\n";
  namespace R = reference;
  const std::pair<const char*, std::pair<double, double>> rows[] = {
      {"mu", {e.mu_pl, R::fig5_mu}},
      {"L", {e.L_smooth, R::fig5_L}},
      {"mu0", {e.mu0_qg, R::fig5_mu0}},
      {"L0", {e.L0_qg, R::fig5_L0}},
      {"mu0/L0", {e.mu0_qg / e.L0_qg, R::fig5_mu0_over_L0}},
      {"mu/L", {e.mu_pl / e.L_smooth, R::fig5_mu_over_L}}};
  for (const auto& [name, vt] : rows)
    out.check(std::string("constant ") + name, detail::within_rel(vt.first, vt.second, R::fig5_tolerance),
              detail::rel_detail(vt.first, vt.second));
}

struct Fig4Numbers {
  GeometryEstimate est;
  double gamma = 0.0;
  RunRecord gd;
  std::vector<double> alphas;
  std::vector<RunRecord> nm;
};

inline Fig4Numbers fig4_numbers(const ExperimentConfig& cfg) {
  Fig4Numbers n;
  const auto f = sine_valley(cfg.number("eps", 1e-3));
  n.est = estimate_constants(f.objective, detail::grid_2d(cfg));
  n.gamma = 1.0 / n.est.L_smooth;
  const int iters = static_cast<int>(cfg.number("iters", 3000));
  const Point x0 = make_point({cfg.number("x0", 0.0), cfg.number("y0", 3.0)});
  n.gd = run_gd(f.objective, GdConfig{n.gamma, iters, std::nullopt}, x0);
  n.alphas = cfg.numbers("alphas", {0.3, 0.6, 0.9});
  for (double a : n.alphas) n.nm.push_back(run_nm_prime(f.objective, NmPrimeConfig{a, n.gamma, iters}, x0));
  return n;
}

inline void run_fig4(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto n = fig4_numbers(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double eps = cfg.number("eps", 1e-3);
  out.files["trace_gd.csv"] = detail::run_csv(n.gd);
  std::ostringstream aiming;
  aiming << "k";
  for (double a : n.alphas) aiming << ",alpha_" << detail::num(a);
  aiming << '\n';
  std::size_t len = 0;
  for (const auto& r : n.nm) len = std::max(len, r.size());
  for (std::size_t k = 0; k < len; ++k) {
    aiming << k;
    for (const auto& r : n.nm) {
      aiming << ',';
      detail::put_number(aiming, k < r.size() ? r.aiming_values[k] : std::nan(""));
    }
    aiming << '\n';
  }
  out.files["aiming.csv"] = aiming.str();
  for (std::size_t i = 0; i < n.alphas.size(); ++i)
    out.files["trace_nm_prime_alpha_" + detail::num(n.alphas[i]) + ".csv"] = detail::run_csv(n.nm[i]);

  const double bound = (2.0 + eps - std::sqrt(eps * eps + 4.0)) / 2.0;
  out.summary << "L = " << detail::num(n.est.L_smooth) << ", gamma = 1/L = " << detail::num(n.gamma) << "\n";
  out.summary << "grid PL mu = " << detail::num(n.est.mu_pl) << " (lower bound " << detail::num(bound) << ")\n";
  out.summary << "GD gap: k=1000 " << detail::num(n.gd.f_gaps.at(std::min<std::size_t>(1000, n.gd.size() - 1)))
              << ", final " << detail::num(n.gd.f_gaps.back()) << "\n";
  for (std::size_t i = 0; i < n.alphas.size(); ++i) {
    const auto& r = n.nm[i];
    double early_min = 1.0;
    for (std::size_t k = 0; k < std::min<std::size_t>(100, r.size()); ++k)
      if (!std::isnan(r.aiming_values[k])) early_min = std::min(early_min, r.aiming_values[k]);
    const auto avg = avg_aiming(r, 0.0, Point::Zero(2));
    out.summary << "NM' alpha=" << detail::num(n.alphas[i]) << ": min aiming (first 100) " << detail::num(early_min)
                << ", gap k=1000 " << detail::num(r.f_gaps.at(std::min<std::size_t>(1000, r.size() - 1))) << ", final "
                << detail::num(r.f_gaps.back()) << ", averaged aiming " << detail::num(avg.a_avg_max) << " ("
                << avg.violated_steps << " negative steps)" << (r.diverged ? ", diverged" : "") << "\n";
  }
  out.check("PL lower bound", n.est.mu_pl >= bound - 1e-6, "grid mu " + detail::num(n.est.mu_pl) + " vs " + detail::num(bound));
  const auto it = std::find(n.alphas.begin(), n.alphas.end(), 0.9);
  if (it == n.alphas.end()) {
    out.check("alpha 0.9 present", false, "alphas override lacks 0.9");
    return;
  }
  const auto& r = n.nm[static_cast<std::size_t>(it - n.alphas.begin())];
  double early_min = 1.0;
  for (std::size_t k = 0; k < std::min<std::size_t>(100, r.size()); ++k)
    if (!std::isnan(r.aiming_values[k])) early_min = std::min(early_min, r.aiming_values[k]);
  out.check("negative aiming in first 100 iterations", early_min < 0.0, "min " + detail::num(early_min));
  const bool long_enough = r.size() > 3000 && n.gd.size() > 3000;
  out.check("NM' behind GD at k=1000", long_enough && r.f_gaps[1000] > n.gd.f_gaps[1000],
            long_enough ? detail::num(r.f_gaps[1000]) + " vs " + detail::num(n.gd.f_gaps[1000]) : "run too short");
  out.check("NM' within 1.5x of GD at k=3000", long_enough && r.f_gaps[3000] <= 1.5 * n.gd.f_gaps[3000],
            long_enough ? detail::num(r.f_gaps[3000]) + " vs " + detail::num(n.gd.f_gaps[3000]) : "run too short");
  out.check("runtime under 5 s", secs < 5.0, detail::num(secs) + " s");
}

struct HardNumbers {
  double scale = 0.0;
  double L = 0.0;
  TuningResult<GdConfig> gd;
  TuningResult<NmContinuizedConfig> nm;
  RateFit gd_fit, nm_fit;
  double a_tilde = 0.0, mu_gd = 0.0, mu_nm = 0.0, mu0 = 0.0, L0 = 0.0, threshold = 0.0;
};

inline HardNumbers hard_numbers(const ExperimentConfig& cfg) {
  HardNumbers n;
  HardInstanceConfig hc;
  hc.T = static_cast<int>(cfg.number("T", 10));
  hc.t = static_cast<int>(cfg.number("t", 5));
  hc.anchor = cfg.number("anchor", 1.0);
  if (cfg.overrides.contains("y")) hc.y.assign(static_cast<std::size_t>(hc.T * hc.t), cfg.number("y", 1.0));
  hc.target_mu = cfg.number("target_mu", 1e-4);
  hc.target_L = cfg.number("target_L", 1e3);
  const auto bench = hard_pl_instance(hc);
  const Objective& f = bench.objective;
  n.scale = bench.analytic.at("scale");
  n.L = hc.target_L;
  const int iters = static_cast<int>(cfg.number("iters", 1000));
  const Point x0 = Point::Zero(f.dim());

  // Step-size grids are set on the unscaled instance and mapped through the calibration scale.
  const double inv = 1.0 / n.scale;
  auto scaled = [inv](std::vector<double> v) {
    for (double& x : v) x *= inv;
    return v;
  };
  n.gd = tune_gd(f, x0, scaled(logspace(1e-3, 1.0, 25)), iters);
  NmGrid grid{logspace(1e-3, 1.0, 7), logspace(1e-3, 1.0, 7), scaled(logspace(std::pow(10.0, -2.5), 1.0, 6)),
              scaled(logspace(1e-2, 10.0, 7))};
  n.nm = tune_nm(f, x0, grid, iters, cfg.seed);
  n.gd_fit = fit_rate(n.gd.record, detail::floor_window(n.gd.record), FitAxis::index);
  n.nm_fit = fit_rate(n.nm.record, detail::floor_window(n.nm.record), FitAxis::index);

  // Path averages over the iterations before the floor, skipping the start point.
  auto path = [&](const RunRecord& r, double& mu_avg, double* a_avg) {
    const auto w = detail::floor_window(r);
    double s_mu = 0.0, s_a = 0.0;
    int cnt_mu = 0, cnt_a = 0;
    for (std::size_t i = 1; i < w.second; ++i) {
      if (!std::isnan(r.pl_values[i])) {
        s_mu += r.pl_values[i];
        ++cnt_mu;
      }
      if (!std::isnan(r.aiming_values[i])) {
        s_a += r.aiming_values[i];
        ++cnt_a;
      }
      const Point dx = r.probes[i] - *f.x_star();
      const double d2 = dx.squaredNorm();
      if (d2 > 0.0) {
        const double q = 2.0 * (f.eval(r.probes[i]) - *f.f_star()) / d2;
        if (q > 0.0) {
          n.mu0 = n.mu0 == 0.0 ? q : std::min(n.mu0, q);
          n.L0 = std::max(n.L0, q);
        }
      }
    }
    mu_avg = cnt_mu ? s_mu / cnt_mu : 0.0;
    if (a_avg) *a_avg = cnt_a ? s_a / cnt_a : 0.0;
  };
  path(n.gd.record, n.mu_gd, nullptr);
  path(n.nm.record, n.mu_nm, &n.a_tilde);
  n.threshold = n.mu_gd * n.gd.best.gamma / std::sqrt(n.nm.best.gamma * n.mu_nm) * std::pow(n.L0 / n.mu0, 0.25);
  return n;
}

inline void run_hard(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto n = hard_numbers(cfg);
  out.files["trace_gd.csv"] = detail::run_csv(n.gd.record);
  out.files["trace_nm.csv"] = detail::run_csv(n.nm.record);
  auto& s = out.summary;
  s << "scale = " << detail::num(n.scale) << " (L target " << detail::num(n.L) << ")\n";
  s << "GD tuned gamma = " << detail::num(n.gd.best.gamma) << ", fitted rate " << detail::num(n.gd_fit.rate) << " over ["
    << n.gd_fit.window.first << ", " << n.gd_fit.window.second << ")\n";
  s << "NM tuned eta = " << detail::num(n.nm.best.eta) << ", eta' = " << detail::num(n.nm.best.eta_prime)
    << ", gamma = " << detail::num(n.nm.best.gamma) << ", gamma' = " << detail::num(n.nm.best.gamma_prime)
    << ", fitted rate " << detail::num(n.nm_fit.rate) << " over [" << n.nm_fit.window.first << ", "
    << n.nm_fit.window.second << ")\n";
  s << "path PL mean: GD " << detail::num(n.mu_gd) << ", NM " << detail::num(n.mu_nm) << "\n";
  s << "path QG range: [" << detail::num(n.mu0) << ", " << detail::num(n.L0) << "]\n";
  s << "heuristic pair: a_tilde = " << detail::num(n.a_tilde) << ", threshold = " << detail::num(n.threshold) << "\n";
  out.check("no acceleration (NM rate <= 1.5 GD rate)", n.nm_fit.rate <= 1.5 * n.gd_fit.rate,
            detail::num(n.nm_fit.rate) + " vs " + detail::num(n.gd_fit.rate));
  const double ratio = std::max(n.a_tilde, n.threshold) / std::min(n.a_tilde, n.threshold);
  out.check("a_tilde and threshold within factor 2", n.a_tilde > 0.0 && n.threshold > 0.0 && ratio <= 2.0,
            detail::num(n.a_tilde) + " vs " + detail::num(n.threshold));
}

/// One envelope case: a trajectory checked against a theorem envelope.
struct EnvelopeCase {
  std::string label;
  EnvelopeBound env;
  EnvelopeCheck result;
};

inline std::vector<EnvelopeCase> envelope_cases() {
  std::vector<EnvelopeCase> cases;
  const auto q = quadratic_diag({1.0, 4.0});
  const Objective& f = q.objective;
  const RateConstants c{q.analytic.at("mu"), q.analytic.at("L"), q.analytic.at("mu0"), q.analytic.at("L0"),
                        q.analytic.at("a"), std::nullopt, std::nullopt, std::nullopt};
  const std::vector<Point> starts{make_point({1.0, 1.0}), make_point({1.0, -0.5}), make_point({-0.3, 0.9}),
                                  make_point({0.8, 0.0}), make_point({0.0, -0.7})};
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const Point& x0 = starts[i];
    const double gap0 = f.eval(x0);
    const std::string tag = " x0#" + std::to_string(i);
    const FlowRecord gf = integrate_gf(f, x0, 1e-3, 8.0);
    for (const char* src : {"gf_pl", "gf_pl_ac"}) {
      const auto env = make_envelope(src, c, gap0);
      cases.push_back({std::string(src) + tag, env, check_envelope(gf, env)});
    }
    {
      const auto env = make_envelope("gf_sqc", c, gap0, {{"tau", 1.0}, {"dist0_sq", x0.squaredNorm()}});
      cases.push_back({"gf_sqc" + tag, env, check_envelope(gf, env)});
    }
    const RunRecord gd = run_gd(f, GdConfig{1.0 / 4.0, 200, std::nullopt}, x0);
    for (const char* src : {"gd_pl", "gd_pl_ac"}) {
      const auto env = make_envelope(src, c, gap0);
      cases.push_back({std::string(src) + tag, env, check_envelope(gd, env)});
    }
    for (double gamma : {0.0, 1.0 / 4.0}) {
      const auto params = nmo_params_theorem3i(*c.mu, *c.mu0, *c.L0, *c.a, gamma);
      const FlowRecord nmo = integrate_nmo(f, params, x0, 1e-3, 20.0);
      const auto env = make_envelope("nmo_pl_ac", c, gap0);
      cases.push_back({"nmo_pl_ac gamma=" + detail::num(gamma) + tag, env, check_envelope(nmo, env)});
    }
    {
      const auto params = nmo_params_pl_prop(*c.mu, 1.0, 1.0);
      const FlowRecord nmo = integrate_nmo(f, params, x0, 1e-3, 3.0);
      const auto env = make_envelope("nmo_pl", c, gap0, {{"gamma", params.gamma}});
      cases.push_back({"nmo_pl" + tag, env, check_envelope(nmo, env)});
    }
  }
  // Scalar quadratic where every constant equals 1.
  const auto unit = quadratic_diag({1.0});
  const RateConstants c1{1.0, 1.0, 1.0, 1.0, 1.0, std::nullopt, std::nullopt, std::nullopt};
  const Point x1 = make_point({0.9});
  const double g1 = unit.objective.eval(x1);
  {
    const FlowRecord nmo = integrate_nmo(unit.objective, nmo_params_theorem3i(1, 1, 1, 1, 0.0), x1, 1e-3, 20.0);
    const auto env = make_envelope("nmo_pl_ac", c1, g1);
    cases.push_back({"nmo_pl_ac unit", env, check_envelope(nmo, env)});
  }
  {
    const auto params = nmo_params_pl_prop(1.0, 1.0, 1.0);
    const FlowRecord nmo = integrate_nmo(unit.objective, params, x1, 1e-3, 3.0);
    const auto env = make_envelope("nmo_pl", c1, g1, {{"gamma", params.gamma}});
    cases.push_back({"nmo_pl unit", env, check_envelope(nmo, env)});
  }
  return cases;
}

inline void run_envelopes(const ExperimentConfig&, ExperimentOutput& out) {
  const auto cases = envelope_cases();
  nlohmann::json j = nlohmann::json::array();
  bool all = true;
  std::string worst;
  for (const auto& c : cases) {
    auto rec = to_json(c.env, c.result);
    rec["case"] = c.label;
    j.push_back(rec);
    out.summary << c.label << ": " << (c.result.holds ? "holds" : "VIOLATED") << ", max ratio "
                << detail::num(c.result.max_ratio) << "\n";
    if (!c.result.holds) {
      all = false;
      worst = c.label;
    }
  }
  out.files["envelopes.json"] = j.dump(2) + "\n";
  out.check("all theorem envelopes hold on certified quadratics", all, all ? std::to_string(cases.size()) + " cases" : worst);
}

struct LemmaNumbers {
  std::vector<std::pair<std::string, double>> grad_checks;
  std::vector<std::pair<std::string, double>> c3_errors;
  double c1_min = 0.0, c2_min = 0.0;
  std::vector<std::pair<std::string, std::pair<double, double>>> exact_gf;  // deviation at h, at h/2
  std::vector<std::pair<std::string, std::pair<double, double>>> hb;        // residual at h, at h/2
  double alpha_mean = 0.0, alpha_sigma = 0.0, alpha_expected = 0.0;
  HighProbResult high_prob;
  std::vector<std::pair<double, double>> sgc_worst;  // rho, max slack (<= 0 passes)
};

inline std::vector<BenchmarkSpec> shipped_benchmarks() {
  std::vector<BenchmarkSpec> out;
  out.push_back(sine_quadratic_1d(5.0, 0.19, 5.0));
  out.push_back(sine_quadratic_1d(2.5, 0.07, 13.0, 10.0));
  out.push_back(valley_2d());
  out.push_back(sine_valley(1e-3));
  out.push_back(radial_sqc(10, 42));
  out.push_back(quadratic_diag({1.0, 4.0}));
  HardInstanceConfig hc;
  hc.T = 2;
  hc.t = 2;
  out.push_back(hard_pl_instance(hc));
  out.push_back(hard_pl_instance(HardInstanceConfig{}));
  return out;
}

inline LemmaNumbers lemma_numbers(const ExperimentConfig& cfg) {
  LemmaNumbers n;
  const auto benches = shipped_benchmarks();
  for (const auto& b : benches)
    n.grad_checks.emplace_back(b.objective.name(), check_gradient_fd(b.objective, 1000, cfg.seed).max_rel_error);

  std::mt19937_64 rng(cfg.seed);
  for (const auto& b : benches) {
    // The identity is algebraic, so it is checked on every benchmark away from x*.
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const Point x = b.objective.domain().sample(rng);
      const Point r = x - *b.objective.x_star();
      const double scale = std::abs(b.objective.grad(x).dot(r)) + b.objective.eval(x) - *b.objective.f_star();
      if (!(scale > 0.0)) continue;
      worst = std::max(worst, check_lemma_c3_identity(b.objective, x) / scale);
    }
    n.c3_errors.emplace_back(b.objective.name(), worst);
  }

  const auto q = quadratic_diag({1.0, 4.0});
  const RateConstants cq{1.0, 4.0, 1.0, 4.0, 0.8, std::nullopt, std::nullopt, std::nullopt};
  n.c1_min = n.c2_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 10000; ++i) {
    const Point x = q.objective.domain().sample(rng);
    n.c1_min = std::min(n.c1_min, check_lemma_c1(q.objective, x, cq));
    n.c2_min = std::min(n.c2_min, check_lemma_c2(q.objective, x, cq));
  }

  const auto s1 = sine_quadratic_1d(5.0, 0.19, 5.0);
  const auto s2 = sine_quadratic_1d(2.5, 0.07, 13.0, 10.0);
  for (const auto* b : {&s1, &s2}) {
    const Point x0 = make_point({1.5});
    const double d1 = exact_gf_check(b->objective, integrate_gf(b->objective, x0, 1e-4, 1.0));
    const double d2 = exact_gf_check(b->objective, integrate_gf(b->objective, x0, 5e-5, 1.0));
    n.exact_gf.push_back({b->objective.name(), {d1, d2}});
  }

  const auto half = quadratic_diag({1.0});
  const NmoParams hp = nmo_constant(1.0, 0.5, 0.3, 0.7);
  for (const auto* b : {&half, &q}) {
    const Point x0 = b->objective.dim() == 1 ? make_point({0.9}) : make_point({0.9, -0.6});
    const double r1 = hb_residual(b->objective, integrate_nmo(b->objective, hp, x0, 1e-2, 2.0), hp);
    const double r2 = hb_residual(b->objective, integrate_nmo(b->objective, hp, x0, 5e-3, 2.0), hp);
    n.hb.push_back({b->objective.name(), {r1, r2}});
  }

  {
    std::mt19937_64 g(cfg.seed);
    const int draws = 100000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < draws; ++i) {
      const double a = continuized_coefficients(1.0, 1.0, detail::exp1(g)).alpha;
      s += a;
      s2 += a * a;
    }
    n.alpha_mean = s / draws;
    n.alpha_sigma = std::sqrt((s2 / draws - n.alpha_mean * n.alpha_mean) / draws);
    n.alpha_expected = 1.0 / 3.0;
  }

  {
    const auto cfg_nm = theorem_params_nm(1.0, 1.0, 4.0, 4.0, 0.8, 1.0, 200, cfg.seed);
    const Point x0 = make_point({0.9, -0.6});
    const auto env = make_envelope("nm_pl_ac", cq, q.objective.eval(x0), {{"c0", 1.0}, {"c1", 0.0}});
    n.high_prob = high_prob_check(q.objective, cfg_nm, env, 200, 500, 2.0, 0.5, x0);
  }

  for (double rho : {1.0, 2.0, 4.0}) {
    double worst = -std::numeric_limits<double>::infinity();
    const double L = 4.0;
    const double delta = std::sqrt(rho - 1.0);
    for (int i = 0; i < 1000; ++i) {
      const Point x = q.objective.domain().sample(rng);
      const Point g = q.objective.grad(x);
      const double f0 = q.objective.eval(x);
      const double e = 0.5 * (q.objective.eval(x - (1.0 - delta) * g / (rho * L)) + q.objective.eval(x - (1.0 + delta) * g / (rho * L))) - f0;
      worst = std::max(worst, e + g.squaredNorm() / (2.0 * rho * L));
    }
    n.sgc_worst.emplace_back(rho, worst);
  }
  return n;
}

inline void run_lemmas(const ExperimentConfig& cfg, ExperimentOutput& out) {
  const auto n = lemma_numbers(cfg);
  auto& s = out.summary;
  bool ok_grad = true;
  for (const auto& [name, e] : n.grad_checks) {
    s << "gradient check " << name << ": " << detail::num(e) << "\n";
    ok_grad = ok_grad && e <= 1e-5;
  }
  bool ok_c3 = true;
  for (const auto& [name, e] : n.c3_errors) {
    s << "identity check " << name << ": " << detail::num(e) << "\n";
    ok_c3 = ok_c3 && e <= 1e-10;
  }
  s << "scalar-product bound min margin: " << detail::num(n.c1_min) << "\n";
  s << "product bound min margin: " << detail::num(n.c2_min) << "\n";
  bool ok_gf = true;
  for (const auto& [name, d] : n.exact_gf) {
    const double order = std::log2(d.first / d.second);
    s << "exact GF rate " << name << ": deviation " << detail::num(d.first) << ", halved step " << detail::num(d.second)
      << ", observed order " << detail::num(order) << "\n";
    ok_gf = ok_gf && d.first <= 1e-4 && order > 1.7 && order < 2.3;
  }
  bool ok_hb = true;
  for (const auto& [name, r] : n.hb) {
    const double order = std::log2(r.first / r.second);
    s << "HB residual " << name << ": " << detail::num(r.first) << ", halved step " << detail::num(r.second)
      << ", observed order " << detail::num(order) << "\n";
    ok_hb = ok_hb && order > 1.7 && order < 2.3;
  }
  s << "continuized E[alpha]: " << detail::num(n.alpha_mean) << " +/- " << detail::num(n.alpha_sigma) << " (expected "
    << detail::num(n.alpha_expected) << ")\n";
  s << "high-probability fraction: " << detail::num(n.high_prob.empirical_frac) << " (floor "
    << detail::num(n.high_prob.theoretical_floor) << ")\n";
  bool ok_sgc = true;
  for (const auto& [rho, w] : n.sgc_worst) {
    s << "stochastic descent lemma rho=" << detail::num(rho) << ": max slack " << detail::num(w) << "\n";
    ok_sgc = ok_sgc && w <= 1e-12;
  }
  out.check("gradient FD checks <= 1e-5", ok_grad, "");
  out.check("pointwise identity <= 1e-10", ok_c3, "");
  out.check("lemma margins >= -1e-12", n.c1_min >= -1e-12 && n.c2_min >= -1e-12,
            detail::num(n.c1_min) + ", " + detail::num(n.c2_min));
  out.check("exact GF identity <= 1e-4 with order 2", ok_gf, "");
  out.check("HB residual order 2", ok_hb, "");
  out.check("continuized E[alpha] within 3 sigma", std::abs(n.alpha_mean - n.alpha_expected) <= 3.0 * n.alpha_sigma,
            detail::num(n.alpha_mean));
  out.check("high-probability fraction >= floor", n.high_prob.empirical_frac >= n.high_prob.theoretical_floor,
            detail::num(n.high_prob.empirical_frac) + " vs " + detail::num(n.high_prob.theoretical_floor));
  out.check("stochastic descent lemma", ok_sgc, "");
}

/// Runs an experiment and fills `out`. Throws ConfigError for unknown names.
inline void run_experiment(const ExperimentConfig& cfg, ExperimentOutput& out) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const std::string& e = cfg.experiment;
  if (e == "fig1-table")
    run_fig1(cfg, out);
  else if (e == "fig2-sweep")
    run_sweep(cfg, out, false);
  else if (e == "fig7-sweep-cont")
    run_sweep(cfg, out, true);
  else if (e == "fig5-bounds")
    run_fig5(cfg, out);
  else if (e == "fig4-valley")
    run_fig4(cfg, out);
  else if (e == "hard-instance")
    run_hard(cfg, out);
  else if (e == "envelopes")
    run_envelopes(cfg, out);
  else if (e == "lemma-suite")
    run_lemmas(cfg, out);
  else
    throw ConfigError("unknown experiment '" + e + "'");
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (e == "fig1-table") out.check("runtime under 60 s", out.seconds < 60.0, detail::num(out.seconds) + " s");
}

/// Writes every output file plus summary.txt into cfg.out_dir.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentOutput& out) {
  std::filesystem::create_directories(cfg.out_dir);
  auto put = [&](const std::string& name, const std::string& body) {
    std::ofstream f(cfg.out_dir / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (cfg.out_dir / name).string());
    f << body;
  };
  for (const auto& [name, body] : out.files) put(name, body);
  put("summary.txt", out.summary.str());
}

}  // namespace plaim

#endif  // PLAIM_EXPERIMENTS_HPP
