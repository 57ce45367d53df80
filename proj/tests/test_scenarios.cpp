#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "affgeo/suites.hpp"

using namespace affgeo;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = AFFGEO_SCENARIO_DIR;

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("affgeo-test-" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_scenario(const fs::path& dir, const std::string& name, const std::string& text) {
  const auto p = dir / name;
  std::ofstream(p, std::ios::binary) << text;
  return p;
}

RunOutcome run_into(const fs::path& scenario, const fs::path& out, std::optional<std::uint64_t> seed = {}) {
  RunOptions opt;
  opt.out = out;
  opt.seed = seed;
  return run_scenario(scenario, opt);
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST(Run, OscillatorWritesTenThousandAndOneRows) {
  TempDir out("oscillator");
  const auto r = run_into(kScenarios / "oscillator_timedep.ini", out.path());
  ASSERT_EQ(r.exit_code, exit_code::kPass) << r.error;
  const auto csv = slurp(out.path() / "oscillator_timedep" / "trajectory.csv");
  EXPECT_EQ(count_lines(csv), 10002u);  // header + T/h + 1 rows
  EXPECT_EQ(csv.rfind("step,time,q,p,t,event_q,event_t\r\n", 0), 0u);
  EXPECT_TRUE(fs::exists(out.path() / "oscillator_timedep" / "report.json"));
}

TEST(Run, CrossProductAffgebraFailsWithWitness) {
  TempDir out("cross");
  const auto r = run_into(kScenarios / "cross_product_affgebra_bad.ini", out.path());
  EXPECT_EQ(r.exit_code, exit_code::kCheckFailed);
  ASSERT_TRUE(r.report.has_value());
  const auto* jacobi = r.report->find("cross_identity.jacobi");
  ASSERT_NE(jacobi, nullptr);
  EXPECT_FALSE(jacobi->pass);
  EXPECT_NE(jacobi->witness.find("(o"), std::string::npos);

  const auto report = nlohmann::json::parse(slurp(out.path() / "cross_product_affgebra_bad" / "report.json"));
  EXPECT_EQ(report["pass"], false);
  bool found = false;
  for (const auto& c : report["checks"])
    if (c["check_name"] == "cross_identity.jacobi") {
      found = true;
      EXPECT_TRUE(c["witness"].is_string());
    }
  EXPECT_TRUE(found);
}

TEST(Run, MissingFileIsAnInputError) {
  TempDir out("missing");
  const auto r = run_into(out.path() / "nope.ini", out.path());
  EXPECT_EQ(r.exit_code, exit_code::kInputError);
  EXPECT_NE(r.error.find("nope.ini"), std::string::npos);
}

TEST(Run, MalformedInputIsAnInputError) {
  TempDir dir("malformed");
  const auto syntax = write_scenario(dir.path(), "syntax.ini", "[scenario\nkind = timedep\n");
  EXPECT_EQ(run_into(syntax, dir.path()).exit_code, exit_code::kInputError);

  const auto kind = write_scenario(dir.path(), "kind.ini", "[scenario]\nkind = nonsense\n");
  const auto r = run_into(kind, dir.path());
  EXPECT_EQ(r.exit_code, exit_code::kInputError);
  EXPECT_NE(r.error.find("nonsense"), std::string::npos);

  const auto expr = write_scenario(dir.path(), "expr.ini",
                                   "[scenario]\nkind = timedep\n[system]\nH = \"p^2/2 + z\"\n"
                                   "[run]\nq0 = 1\np0 = 0\nh = 0.1\nT = 1\n");
  const auto e = run_into(expr, dir.path());
  EXPECT_EQ(e.exit_code, exit_code::kInputError);
  EXPECT_NE(e.error.find("z"), std::string::npos);

  const auto value = write_scenario(dir.path(), "value.ini",
                                    "[scenario]\nkind = timedep\n[system]\nH = \"p^2/2\"\n"
                                    "[run]\nq0 = one\np0 = 0\nh = 0.1\nT = 1\n");
  EXPECT_EQ(run_into(value, dir.path()).exit_code, exit_code::kInputError);
}

TEST(Run, DomainErrorAtRunTimeExitsThree) {
  TempDir dir("domain");
  // The reduced field of H = q/t is singular on the check grid at t = 0.
  const auto p = write_scenario(dir.path(), "pole.ini",
                                "[scenario]\nkind = timedep\n[system]\nH = \"p^2/2 + q/t\"\n"
                                "[run]\nq0 = 1\np0 = 0\nt0 = 1\nh = 0.1\nT = 1\n");
  const auto r = run_into(p, dir.path());
  EXPECT_EQ(r.exit_code, exit_code::kRuntimeError);
  EXPECT_FALSE(r.error.empty());
}

TEST(Run, BundledScenariosHaveTheirExpectedExitCodes) {
  TempDir out("bundled");
  for (const auto& info : list_scenarios(kScenarios)) {
    if (info.kind == "determinism") continue;
    const auto r = run_into(kScenarios / info.file, out.path());
    const bool expect_failure = info.file.find("_bad") != std::string::npos;
    EXPECT_EQ(r.exit_code, expect_failure ? exit_code::kCheckFailed : exit_code::kPass) << info.file << ": " << r.error;
  }
}

TEST(Run, SeedOverrideIsReproducibleAndEffective) {
  TempDir out("seed");
  const auto scenario = kScenarios / "affine_axioms.ini";
  const auto a = run_into(scenario, out.path() / "a", 5);
  const auto b = run_into(scenario, out.path() / "b", 5);
  const auto c = run_into(scenario, out.path() / "c", 6);
  ASSERT_EQ(a.exit_code, exit_code::kPass);
  const auto ra = slurp(out.path() / "a" / "affine_axioms" / "report.json");
  EXPECT_EQ(ra, slurp(out.path() / "b" / "affine_axioms" / "report.json"));
  EXPECT_NE(ra, slurp(out.path() / "c" / "affine_axioms" / "report.json"));
  EXPECT_EQ(c.exit_code, exit_code::kPass);
}

TEST(Run, OutputDirectoryPrecedence) {
  TempDir dir("precedence");
  const auto scenario = write_scenario(dir.path(), "tiny.ini",
                                       "[scenario]\nkind = affgebra-verify\noutput = \"" +
                                           (dir.path() / "from_file").generic_string() +
                                           "\"\n[structure:so3]\ndim = 3\nc = so3\nD = zero\n");
  const auto env_dir = dir.path() / "from_env";
  const auto flag_dir = dir.path() / "from_flag";

  // Scenario key alone.
  ::unsetenv("AFFGEO_OUT");
  EXPECT_EQ(run_scenario(scenario).out_dir, dir.path() / "from_file" / "tiny");

  // The environment beats the scenario key.
  ::setenv("AFFGEO_OUT", env_dir.c_str(), 1);
  EXPECT_EQ(run_scenario(scenario).out_dir, env_dir / "tiny");
  EXPECT_TRUE(fs::exists(env_dir / "tiny" / "report.json"));

  // The explicit option beats both.
  RunOptions opt;
  opt.out = flag_dir;
  EXPECT_EQ(run_scenario(scenario, opt).out_dir, flag_dir / "tiny");
  ::unsetenv("AFFGEO_OUT");
}

TEST(Run, ReportJsonShape) {
  TempDir out("shape");
  ASSERT_EQ(run_into(kScenarios / "affgebra_suite.ini", out.path()).exit_code, exit_code::kPass);
  const auto text = slurp(out.path() / "affgebra_suite" / "report.json");
  EXPECT_EQ(text.back(), '\n');
  const auto j = nlohmann::ordered_json::parse(text);
  EXPECT_EQ(j.begin().key(), "scenario");
  EXPECT_EQ(j["scenario"], "affgebra_suite");
  ASSERT_TRUE(j["checks"].is_array());
  for (const auto& c : j["checks"]) {
    EXPECT_TRUE(c.contains("check_name"));
    EXPECT_TRUE(c["pass"].is_boolean());
    EXPECT_TRUE(c["max_residual"].is_number() || c["max_residual"] == "inf");
    EXPECT_TRUE(c.contains("witness"));
  }
  EXPECT_EQ(j["pass"], true);
}

TEST(List, BundledScenarios) {
  const auto all = list_scenarios(kScenarios);
  EXPECT_GE(all.size(), 8u);
  for (const auto& s : all) {
    EXPECT_NE(s.kind, "invalid") << s.file << ": " << s.description;
    EXPECT_FALSE(s.description.empty()) << s.file;
  }
  std::set<int> criteria;
  for (const auto& s : all)
    if (s.criterion) criteria.insert(s.criterion);
  EXPECT_EQ(criteria.size(), 10u);
}

TEST(List, KindFilter) {
  const auto newton = list_scenarios(kScenarios, "newton");
  ASSERT_FALSE(newton.empty());
  for (const auto& s : newton) EXPECT_EQ(s.kind, "newton");
  EXPECT_TRUE(list_scenarios(kScenarios, "no-such-kind").empty());
}

TEST(List, Json) {
  const auto j = to_json(list_scenarios(kScenarios));
  ASSERT_TRUE(j.is_array());
  ASSERT_GE(j.size(), 8u);
  for (const auto& e : j) {
    EXPECT_TRUE(e["id"].is_string());
    EXPECT_TRUE(e["kind"].is_string());
    EXPECT_TRUE(e["description"].is_string());
  }
  // Round trip through text.
  EXPECT_EQ(nlohmann::ordered_json::parse(j.dump()), j);
}

TEST(Determinism, SameSeedGivesIdenticalBytes) {
  TempDir out("determinism");
  for (const char* name : {"frame_independence.ini", "time_fields_hull.ini"}) {
    run_into(kScenarios / name, out.path() / "1");
    run_into(kScenarios / name, out.path() / "2");
  }
  const auto one = detail::read_tree(out.path() / "1"), two = detail::read_tree(out.path() / "2");
  ASSERT_FALSE(one.empty());
  EXPECT_EQ(one, two);
}
