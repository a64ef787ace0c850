#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "qnls/experiment.hpp"

using namespace qnls;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(d);
  return d;
}

}  // namespace

TEST_CASE("scenario names") {
  for (const char* n : {"validate", "groundstate", "evolve", "virial", "threshold", "blowup", "stability", "scaling-law"})
    CHECK(std::string(to_string(scenario_from_string(n))) == n);
  CHECK_THROWS(scenario_from_string("everything"));
}

TEST_CASE("config parsing") {
  std::istringstream in(R"(
seed = 42   # top-level
[model]
name = cascade3
chi = 0.5
beta = 0.1, 0.2, 0.3

[grid]
dim = 3
points = 300
extent = 12.5

[evolve]
dt = 2e-3
adaptive = yes
dt_min = 1e-8
initial = ground

[groundstate]
omega = 2
c = 1.1

[output]
dir = somewhere
)");
  const auto c = parse_config(in, Scenario::Evolve);
  CHECK(c.scenario == Scenario::Evolve);
  CHECK(c.seed == 42);
  CHECK(c.model == "cascade3");
  CHECK(c.params.chi == 0.5);
  CHECK(*c.params.beta == std::vector<double>{0.1, 0.2, 0.3});
  CHECK(c.grid().kind == GridKind::Radial);
  CHECK(c.grid().points == 300);
  CHECK(c.grid().extent == 12.5);
  CHECK(c.evolve.dt == 2e-3);
  CHECK(c.evolve.adaptive);
  CHECK(c.initial == "ground");
  CHECK(c.omega == 2);
  CHECK(c.c == doctest::Approx(1.1));
  CHECK(c.out_dir == "somewhere");
  CHECK(c.make_model().coeffs().beta[2] == doctest::Approx(0.3));
}

TEST_CASE("config errors") {
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return parse_config(in, Scenario::Validate);
  };
  CHECK_THROWS_WITH(parse("[grid]\nsize = 3\n"), doctest::Contains("unknown config key"));
  CHECK_THROWS_WITH(parse("[physics]\n"), doctest::Contains("unknown section"));
  CHECK_THROWS(parse("[grid\n"));
  CHECK_THROWS(parse("[grid]\npoints\n"));
  CHECK_THROWS_WITH(parse("[grid]\npoints = 12x\n"), doctest::Contains("expected an integer"));
  CHECK_THROWS(parse("[evolve]\ndt = fast\n"));
  CHECK_THROWS(parse("[evolve]\nadaptive = maybe\n"));
  CHECK_THROWS(parse("[grid]\nkind = polar\n").grid());
  CHECK_THROWS(load_config("/nonexistent/qnls.conf", Scenario::Validate));
}

TEST_CASE("entries round trip through set_config_value") {
  ExperimentConfig a;
  a.model = "uv2";
  a.params.kappa = 0.5;
  a.params.beta = std::vector<double>{0.25, 0.5};
  a.dim = 2;
  a.evolve.t_end = 3.5;
  a.archive = "g.qnls";
  ExperimentConfig b;
  for (const auto& [k, v] : a.entries())
    if (k != "scenario") set_config_value(b, k, v);
  CHECK(b.entries() == a.entries());
}

TEST_CASE("shipped configs parse") {
  int count = 0;
  for (const auto& e : std::filesystem::directory_iterator(std::filesystem::path(QNLS_SOURCE_DIR) / "configs")) {
    INFO(e.path());
    CHECK_NOTHROW(load_config(e.path(), Scenario::Validate).grid());
    ++count;
  }
  CHECK(count >= 8);
}

TEST_CASE("report formatting") {
  ExperimentReport r;
  r.scenario = Scenario::Virial;
  r.config = {{"grid.dim", "2"}};
  r.add_below("drift", 1e-9, 1e-8, "conservation law");
  r.add("ratio", 2.0, "3", "closed form", 0.1, false);
  r.values.emplace_back("K", 1.5);
  CHECK_FALSE(r.all_pass());
  const auto t = r.text();
  CHECK(t.find("[PASS] drift") != std::string::npos);
  CHECK(t.find("[FAIL] ratio") != std::string::npos);
  const auto j = nlohmann::json::parse(r.json());
  CHECK(j["scenario"] == "virial");
  CHECK(j["pass"] == false);
  CHECK(j["criteria"].size() == 2);
  CHECK(j["criteria"][0]["pass"] == true);
  CHECK(j["criteria"][1]["measured"] == 2.0);
  CHECK(j["config"]["grid.dim"] == "2");
}

TEST_CASE("chirped Gaussian data") {
  // exp(-x^2 - i b x^2) in both components: V' = 4 sum alpha_k (-2b) int x^2 exp(-2x^2)
  ExperimentConfig c;
  c.scenario = Scenario::Evolve;
  c.model_file.reset();
  c.model = "uv2";
  c.points = 256;
  c.extent = 12;
  c.chirp = 0.3;
  c.evolve.dt = 1e-3;
  c.evolve.t_end = 1e-3;
  c.evolve.sample_every = 1;
  c.out_dir = temp_dir("qnls_test_chirp");
  const auto r = run_experiment(c);
  const auto rows = read_diagnostics_csv(c.out_dir / "diagnostics.csv");
  const double moment = std::sqrt(std::numbers::pi / 2) / 4;
  CHECK(rows.front().Vp == doctest::Approx(-8 * 0.3 * (1 + 1) * moment).epsilon(1e-9));
  std::filesystem::remove_all(c.out_dir);
}

TEST_CASE("validate scenario passes for every builtin model") {
  for (const auto& name : builtin_model_names()) {
    ExperimentConfig c;
    c.model = name;
    c.samples = 200;
    const auto r = cmd_validate(c);
    INFO(name << "\n" << r.text());
    CHECK(r.all_pass());
    CHECK_FALSE(r.criteria.empty());
  }
}

TEST_CASE("validate scenario reports a broken model") {
  const auto dir = temp_dir("qnls_test_badmodel");
  std::filesystem::create_directories(dir);
  {
    std::ofstream m(dir / "bad.model");
    m << "l=3\nalpha=1,1,1\ngamma=1,1,1\nterm=1,0;p=1,1,1;q=0,0,0\n";
  }
  ExperimentConfig c;
  c.model_file = dir / "bad.model";
  const auto r = cmd_validate(c);
  CHECK_FALSE(r.all_pass());
  std::filesystem::remove_all(dir);
}

TEST_CASE("groundstate scenario writes its outputs") {
  ExperimentConfig c;
  c.scenario = Scenario::GroundState;
  c.model = "uv2";
  c.params.kappa = 1;
  c.points = 512;
  c.extent = 30;
  c.out_dir = temp_dir("qnls_test_gs");
  const auto r = run_experiment(c);
  INFO(r.text());
  CHECK(r.all_pass());
  bool exact = false;
  for (const auto& cr : r.criteria) exact = exact || cr.name.find("exact") != std::string::npos;
  CHECK(exact);
  CHECK(std::filesystem::exists(c.out_dir / "report.txt"));
  CHECK(std::filesystem::exists(c.out_dir / "report.json"));
  CHECK(std::filesystem::exists(c.out_dir / "groundstate.qnls"));
  const auto back = read_groundstate_archive(c.out_dir / "groundstate.qnls", c.make_model());
  CHECK(back.residual < 1e-9);
  std::filesystem::remove_all(c.out_dir);
}

TEST_CASE("scaling-law scenario") {
  ExperimentConfig c;
  c.scenario = Scenario::ScalingLaw;
  c.model = "uv2";
  c.points = 256;
  c.extent = 30;
  c.out_dir = temp_dir("qnls_test_scaling");
  const auto r = run_experiment(c);
  INFO(r.text());
  CHECK(r.all_pass());
  std::filesystem::remove_all(c.out_dir);
}
