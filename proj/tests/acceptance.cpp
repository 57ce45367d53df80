// Acceptance runner: one PASS/FAIL line per criterion, driven by the bundled scenarios.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "affgeo/suites.hpp"

using namespace affgeo;

namespace {

constexpr double kAny = std::numeric_limits<double>::infinity();
constexpr double kExact = 0.0;  // residual must be exactly zero

/// A family of checks that must be present, pass, and stay under `tolerance`.
struct Rule {
  std::string pattern;  // regex on the check name
  double tolerance = kAny;
  bool needs_witness = false;
  std::size_t min_matches = 1;
};

struct Criterion {
  int number;
  std::string summary;
  double time_limit;  // seconds, infinity when no limit is stated
  std::vector<Rule> rules;
};

std::vector<Criterion> criteria() {
  return {
      {1, "affine axioms", 1.0,
       {{"cocycle", 1e-12}, {"biaffine_.*", 1e-12, false, 3}, {"chart_roundtrip", 1e-12}}},
      {2, "duality", 1.0,
       {{"dual_dimension", kExact},
        {"double_dual_roundtrip", 1e-12},
        {"F_sigma_ds", kExact},
        {"F_sigma_vanishes", kExact}}},
      {3, "affgebra verifier", 1.0,
       {{"abelian_.*\\.jacobi", 1e-12, false, 2}, {"so3\\.jacobi", 1e-12}, {"cross_identity\\.rejected", kAny, true}}},
      {4, "hull extension", 5.0, {{"hull\\.hull_jacobi", 1e-9}, {"hull\\.restriction", 1e-12}}},
      {5, "aff-Jacobi bracket of the Atiyah algebroid", 5.0,
       {{"atiyah_R[12]\\.canonical", 1e-9, false, 2}, {".*\\.criteria_agree", kAny, false, 4}}},
      {6, "omega invariance", 2.0, {{".*\\.omega_invariance", 1e-12, false, 2}, {".*\\.dd_zero", 1e-12, false, 2}}},
      {7, "time reduction", 2.0,
       {{"fiber_constancy", 1e-9}, {"reduction", kAny}, {"flipped_rejected", kAny, true}}},
      {8, "dynamics recovery", 10.0,
       {{"dynamics_recovery", 1e-12}, {"reference_[qp]", 1e-6, false, 2}, {"period_return", 1e-9}}},
      {9, "frame independence", 30.0,
       {{"(free|gravity|harmonic)\\.random[123]\\.world_lines", 1e-6, false, 9},
        {".*gauge_roundtrip", 1e-12},
        {"clock", 1e-12},
        {".*energy", 1e-6}}},
      {10, "CLI determinism", kAny, {{".*\\.identical", kAny, false, 9}}},
  };
}

/// Returns an empty string when every rule holds, otherwise the first violation.
std::string evaluate_rules(const Report& report, const std::vector<Rule>& rules) {
  for (const auto& rule : rules) {
    const std::regex re(rule.pattern);
    std::size_t matches = 0;
    for (const auto& c : report.checks) {
      if (!std::regex_match(c.name, re)) continue;
      ++matches;
      if (!c.pass) return c.name + " failed: " + c.witness;
      const bool within = rule.tolerance == kExact ? c.residual == 0.0 : c.residual < rule.tolerance;
      if (rule.tolerance != kAny && !within) {
        std::ostringstream os;
        os << c.name << " residual " << c.residual << " >= " << rule.tolerance;
        return os.str();
      }
      if (rule.needs_witness && c.witness.empty()) return c.name + " has no witness";
    }
    if (matches < rule.min_matches)
      return "expected at least " + std::to_string(rule.min_matches) + " checks matching " + rule.pattern + ", found " +
             std::to_string(matches);
  }
  return {};
}

double worst_residual(const Report& report) {
  double worst = 0.0;
  for (const auto& c : report.checks)
    if (std::isfinite(c.residual) && c.name.find("rejected") == std::string::npos) worst = std::max(worst, c.residual);
  return worst;
}

}  // namespace

int main() {
  const std::filesystem::path out = std::filesystem::temp_directory_path() / "affgeo-acceptance";
  std::filesystem::remove_all(out);
  const auto scenarios = list_scenarios(AFFGEO_SCENARIO_DIR);

  int failures = 0;
  for (const auto& crit : criteria()) {
    std::string problem;
    double seconds = 0.0, worst = 0.0;
    std::size_t ran = 0;
    for (const auto& info : scenarios) {
      if (info.criterion != crit.number) continue;
      ++ran;
      RunOptions opt;
      opt.out = out;
      const auto start = std::chrono::steady_clock::now();
      const auto result = run_scenario(std::filesystem::path(AFFGEO_SCENARIO_DIR) / info.file, opt);
      seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (result.exit_code != exit_code::kPass) {
        problem = info.file + " exited " + std::to_string(result.exit_code) +
                  (result.error.empty() ? std::string() : ": " + result.error);
        break;
      }
      if (auto why = evaluate_rules(*result.report, crit.rules); !why.empty()) {
        problem = info.file + ": " + why;
        break;
      }
      worst = std::max(worst, worst_residual(*result.report));
    }
    if (ran == 0) problem = "no bundled scenario declares this criterion";
    if (problem.empty() && seconds >= crit.time_limit) {
      std::ostringstream os;
      os << "runtime exceeds " << crit.time_limit << " s";
      problem = os.str();
    }

    char timing[64];
    std::snprintf(timing, sizeof timing, "%.3f s", seconds);
    if (problem.empty()) {
      std::cout << "PASS criterion " << crit.number << ": " << crit.summary << " (max residual " << worst << ", "
                << timing << ")\n";
    } else {
      ++failures;
      std::cout << "FAIL criterion " << crit.number << ": " << crit.summary << ": " << problem << " (" << timing
                << ")\n";
    }
  }
  std::filesystem::remove_all(out);
  return failures == 0 ? 0 : 1;
}
