// Command-line front end: run a scenario file or list the bundled ones.

#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "affgeo/affgeo.hpp"

namespace {

int run_command(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& out, bool json) {
  affgeo::RunOptions opt;
  opt.seed = seed;
  if (!out.empty()) opt.out = out;
  const auto result = affgeo::run_scenario(path, opt);
  if (!result.report) {
    std::cerr << "affgeo: " << result.error << '\n';
    return result.exit_code;
  }
  if (json) {
    std::cout << affgeo::to_json(*result.report).dump(2) << '\n';
  } else {
    for (const auto& c : result.report->checks) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << std::left << std::setw(44) << c.name << ' '
                << affgeo::format_number(c.residual);
      if (!c.witness.empty()) std::cout << "  [" << c.witness << ']';
      std::cout << '\n';
    }
    std::cout << result.id << ": " << (result.report->pass() ? "pass" : "FAIL") << " (" << result.out_dir.string()
              << ")\n";
  }
  return result.exit_code;
}

int list_command(const std::string& dir, const std::string& kind, bool json) {
  const auto list = affgeo::list_scenarios(dir, kind);
  if (json) {
    std::cout << affgeo::to_json(list).dump(2) << '\n';
    return 0;
  }
  for (const auto& s : list) {
    std::cout << std::left << std::setw(30) << s.id << ' ' << std::setw(18) << s.kind << ' ' << std::setw(4)
              << (s.criterion ? "#" + std::to_string(s.criterion) : std::string("-")) << ' ' << s.description
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"affgeo: affine-value geometry checks and simulations"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run one scenario file");
  std::string path, out;
  std::optional<std::uint64_t> seed;
  bool run_json = false;
  run->add_option("path", path, "Scenario file")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--out", out, "Output directory (default: $AFFGEO_OUT, then the scenario's, then affgeo-out)");
  run->add_flag("--json", run_json, "Print the report as JSON");

  auto* list = app.add_subcommand("list", "List bundled scenarios");
  std::string dir = AFFGEO_SCENARIO_DIR, kind;
  bool list_json = false;
  list->add_option("--dir", dir, "Scenario directory");
  list->add_option("--kind", kind, "Only scenarios of this kind");
  list->add_flag("--json", list_json, "Print the listing as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : affgeo::exit_code::kInputError;
  }
  if (*run) return run_command(path, seed, out, run_json);
  return list_command(dir, kind, list_json);
}
