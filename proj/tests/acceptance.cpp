// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "plaim/experiments.hpp"

using namespace plaim;

namespace {

struct Criterion {
  int id;
  std::string title;
  std::vector<std::string> experiments;
  // Selects which of an experiment's checks belong to this criterion.
  std::function<bool(const std::string&)> select;
};

bool any(const std::string&) { return true; }

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "rate table reproduction and runtime", {"fig1-table"},
       [](const std::string& n) { return n.rfind("table ", 0) == 0 || n == "runtime under 60 s"; }},
      {2, "sine-quadratic constants on the wide domain", {"fig5-bounds"}, any},
      {3, "valley aiming value", {"fig1-table"}, [](const std::string& n) { return n == "valley aiming within factor 2"; }},
      {4, "sine-valley PL lower bound", {"fig4-valley"}, [](const std::string& n) { return n == "PL lower bound"; }},
      {5, "momentum on the sine valley", {"fig4-valley"}, [](const std::string& n) { return n != "PL lower bound"; }},
      {6, "hard instance shows no acceleration", {"hard-instance"}, any},
      {7, "property suites", {"lemma-suite", "envelopes"}, any},
      {8, "SQC sweep argmax split and cutoff", {"fig2-sweep", "fig7-sweep-cont"}, any},
  };

  std::map<std::string, ExperimentOutput> outputs;
  for (const auto& c : criteria)
    for (const auto& e : c.experiments) {
      if (outputs.count(e)) continue;
      ExperimentConfig cfg;
      cfg.experiment = e;
      try {
        run_experiment(cfg, outputs[e]);
      } catch (const std::exception& ex) {
        outputs[e].check("experiment ran", false, ex.what());
      }
    }

  int failed = 0;
  for (const auto& c : criteria) {
    bool pass = true;
    std::string misses;
    int counted = 0;
    for (const auto& e : c.experiments)
      for (const auto& chk : outputs[e].checks) {
        if (chk.name != "experiment ran" && !c.select(chk.name)) continue;
        ++counted;
        if (!chk.pass) {
          pass = false;
          misses += (misses.empty() ? "" : "; ") + chk.name + (chk.detail.empty() ? "" : " (" + chk.detail + ")");
        }
      }
    if (counted == 0) {
      pass = false;
      misses = "no checks produced";
    }
    if (!pass) ++failed;
    std::printf("%s criterion %d: %s (%d checks)%s%s\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(), counted,
                pass ? "" : ": ", misses.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
