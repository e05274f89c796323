// SPDX-License-Identifier: Apache-2.0
// plaim: command-line runner for the reproduction experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "plaim/experiments.hpp"

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitCheckMiss = 2;

// Parses "key=value" where value is JSON if it parses, otherwise a plain string.
void apply_override(nlohmann::json& overrides, const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw plaim::ConfigError("--set expects key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
  try {
    overrides[key] = nlohmann::json::parse(value);
  } catch (const nlohmann::json::parse_error&) {
    overrides[key] = value;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Run a reproduction experiment and write CSV outputs plus summary.txt."};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long long> resolution;
  std::optional<std::string> out_dir;
  std::vector<std::string> sets;
  bool check = false;

  std::string names;
  for (const auto& n : plaim::experiment_names()) names += (names.empty() ? "" : ", ") + n;
  app.add_option("experiment", experiment, "One of: " + names);
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--grid-resolution", resolution, "Grid points (1-D) for constant estimation");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--set", sets, "Experiment override key=value (repeatable)");
  app.add_flag("--check", check, "Compare against reference tolerances; exit 2 on a miss");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  plaim::ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = plaim::parse_config(config_path);
    if (!experiment.empty()) cfg.experiment = experiment;
    if (seed) cfg.seed = *seed;
    if (resolution) cfg.grid_resolution = *resolution;
    if (out_dir) cfg.out_dir = *out_dir;
    for (const auto& kv : sets) apply_override(cfg.overrides, kv);
    cfg.validate();
  } catch (const plaim::ConfigError& e) {
    std::cerr << "plaim: " << e.what() << "\n";
    return kExitUsage;
  }

  const auto& known = plaim::experiment_names();
  if (std::find(known.begin(), known.end(), cfg.experiment) == known.end()) {
    std::cerr << "plaim: unknown experiment '" << cfg.experiment << "'\n" << app.help();
    return kExitUsage;
  }

  plaim::ExperimentOutput out;
  try {
    plaim::run_experiment(cfg, out);
    plaim::write_outputs(cfg, out);
  } catch (const plaim::ConfigError& e) {
    std::cerr << "plaim: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "plaim: " << cfg.experiment << " failed: " << e.what() << "\n";
    return 1;
  }

  std::cout << out.summary.str();
  std::printf("runtime: %.3f s\n", out.seconds);
  std::cout << "outputs written to " << cfg.out_dir.string() << "\n";
  if (!check) return 0;
  for (const auto& c : out.checks)
    std::cout << (c.pass ? "CHECK PASS " : "CHECK FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail)
              << "\n";
  return out.all_pass() ? 0 : kExitCheckMiss;
}
