#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "qnls/evolve.hpp"
#include "qnls/groundstate.hpp"

using namespace qnls;

namespace {

ModelSpec free_model() { return parse_model_text("l=1\nalpha=1\ngamma=1\n"); }

// free Schrodinger flow of exp(-r^2) for i u_t + Lap u = 0
cplx free_gaussian(double r2, double t, int n) {
  const cplx d(1, 4 * t);
  return std::pow(d, -0.5 * n) * std::exp(-r2 / d);
}

double max_error_vs_free(const FieldState& s, int n) {
  const auto& r2 = geometry(s.grid).radius_sq;
  double err = 0;
  for (std::size_t i = 0; i < r2.size(); ++i) err = std::max(err, std::abs(s.components[0][i] - free_gaussian(r2[i], s.t, n)));
  return err;
}

FieldState shg3_gaussian(const GridSpec& g, double amp, double width = std::sqrt(2.0)) {
  return make_state(builtin_model("shg3"), g, [=](int k, std::span<const double> x) {
    double r2 = 0;
    for (double v : x) r2 += v * v;
    return cplx(amp * (1 - 0.2 * k) * std::exp(-r2 / (width * width)));
  });
}

double relative_l2(const FieldState& a, const FieldState& b) {
  double num = 0, den = 0;
  for (std::size_t k = 0; k < a.components.size(); ++k) {
    Field d = a.components[k];
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= b.components[k][i];
    num += norm_sq(d);
    den += norm_sq(b.components[k]);
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("config validation") {
  EvolveConfig c;
  CHECK_NOTHROW(c.validate());
  c.dt = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.t_end = 1e-4;
  CHECK_THROWS(c.validate());
  c = {};
  c.sample_every = 0;
  CHECK_THROWS(c.validate());
  c = {};
  c.adaptive = true;
  c.dt_min = 1;
  CHECK_THROWS(c.validate());
  CHECK(std::string(to_string(EvolutionStatus::BlownUp)) == "BlownUp");
}

TEST_CASE("free Gaussian matches the closed form") {
  EvolveConfig c;
  c.dt = 0.01;
  c.t_end = 0.5;
  SUBCASE("cartesian step is exact") {
    const auto s = make_state(free_model(), GridSpec::cartesian(1, 512, 40),
                              [](int, std::span<const double> x) { return cplx(std::exp(-x[0] * x[0])); });
    const auto out = split_step(s, c);
    CHECK(out.status == EvolutionStatus::Completed);
    CHECK(out.final.t == doctest::Approx(0.5));
    CHECK(max_error_vs_free(out.final, 1) < 1e-10);
  }
  SUBCASE("radial Crank-Nicolson is second order in dt") {
    std::vector<double> err;
    for (double dt : {0.02, 0.01}) {
      const auto s = make_state(free_model(), GridSpec::radial(3, 4000, 40),
                                [](int, std::span<const double> x) { return cplx(std::exp(-x[0] * x[0])); });
      c.dt = dt;
      const auto out = radial_step(s, c);
      err.push_back(max_error_vs_free(out.final, 3));
    }
    INFO(err[0] << " " << err[1]);
    CHECK(err[0] < 1e-2);
    CHECK(err[0] / err[1] > 3.5);
    CHECK(err[0] / err[1] < 4.5);
  }
}

TEST_CASE("linear substep is unitary") {
  for (const auto& g : {GridSpec::cartesian(2, 32, 8), GridSpec::radial(4, 200, 10)}) {
    auto s = shg3_gaussian(g, 1.0);
    const double Q = charge(s);
    for (int i = 0; i < 10; ++i) linear_substep(s, 0.05);
    CHECK(charge(s) == doctest::Approx(Q).epsilon(1e-13));
  }
}

TEST_CASE("nonlinear substep conserves charge and is fourth order") {
  const auto g = GridSpec::radial(2, 100, 6);
  auto ref = shg3_gaussian(g, 2.0);
  const auto init = ref;
  for (int i = 0; i < 256; ++i) nonlinear_substep(ref, 0.2 / 256);
  std::vector<double> err;
  for (int steps : {4, 8}) {
    auto s = init;
    for (int i = 0; i < steps; ++i) nonlinear_substep(s, 0.2 / steps);
    CHECK(charge(s) == doctest::Approx(charge(init)).epsilon(1e-5));
    CHECK(interaction(s) == doctest::Approx(interaction(init)).epsilon(1e-4));
    err.push_back(relative_l2(s, ref));
  }
  INFO(err[0] << " " << err[1]);
  CHECK(err[0] / err[1] > 12);
  CHECK(err[0] / err[1] < 20);
}

TEST_CASE("charge is conserved and energy drift is second order") {
  const auto g = GridSpec::cartesian(1, 256, 20);
  const auto s = shg3_gaussian(g, 1.5);
  std::vector<double> drift, qdrift;
  for (double dt : {0.02, 0.01, 0.005}) {
    EvolveConfig c;
    c.dt = dt;
    c.t_end = 2;
    c.sample_every = 5;
    const auto out = run_with_monitors(s, c);
    REQUIRE(out.status == EvolutionStatus::Completed);
    qdrift.push_back(out.max_Q_drift);
    drift.push_back(out.max_E_drift);
    CHECK(out.diagnostics.size() >= 2);
    CHECK(out.diagnostics.back().t == doctest::Approx(2));
  }
  INFO(drift[0] << " " << drift[1] << " " << drift[2]);
  CHECK(drift[0] / drift[1] > 3.5);
  CHECK(drift[1] / drift[2] > 3.5);
  CHECK(drift[1] / drift[2] < 4.5);
  // only the RK4 nonlinear substeps move Q
  CHECK(qdrift[0] < 1e-9);
  CHECK(qdrift[1] / qdrift[2] > 8);
}

TEST_CASE("ground state evolves as a standing wave") {
  const double omega = 1;
  const auto gs = petviashvili_solve(builtin_model("uv2"), omega, GridSpec::cartesian(1, 256, 30));
  REQUIRE(gs.residual < 1e-8);
  const auto res = pde_residual(standing_wave(gs.profile, omega, 0.7), standing_wave_dt(gs.profile, omega, 0.7));
  for (double r : res) CHECK(r < 1e-8);
  EvolveConfig c;
  c.dt = 2e-3;
  c.t_end = 1;
  const auto out = run_with_monitors(gs.profile, c);
  CHECK(relative_l2(out.final, standing_wave(gs.profile, omega, 1)) < 1e-5);
}

TEST_CASE("zero data stays zero") {
  const auto s = make_state(builtin_model("cascade3"), GridSpec::radial(3, 100, 10), [](int, std::span<const double>) { return cplx{}; });
  EvolveConfig c;
  c.dt = 0.05;
  c.t_end = 1;
  const auto out = run_with_monitors(s, c);
  CHECK(out.status == EvolutionStatus::Completed);
  for (const auto& f : out.final.components) CHECK(sup_norm(f) == 0);
}

TEST_CASE("blow-up and abort detection") {
  SUBCASE("amplitude threshold") {
    EvolveConfig c;
    c.blowup_linf = 0.5;
    const auto out = run_with_monitors(shg3_gaussian(GridSpec::radial(3, 100, 10), 1.0), c);
    CHECK(out.status == EvolutionStatus::BlownUp);
    CHECK_FALSE(out.reason.empty());
  }
  SUBCASE("non-finite data") {
    auto s = shg3_gaussian(GridSpec::radial(3, 100, 10), 1.0);
    s.components[1][5] = std::numeric_limits<double>::quiet_NaN();
    EvolveConfig c;
    const auto out = run_with_monitors(s, c);
    CHECK(out.status == EvolutionStatus::Aborted);
  }
  SUBCASE("kinetic growth in five dimensions") {
    EvolveConfig c;
    c.dt = 1e-3;
    c.t_end = 1;
    c.blowup_K_factor = 100;
    c.adaptive = true;
    c.dt_min = 1e-7;
    const auto s = shg3_gaussian(GridSpec::radial(5, 400, 10), 30.0, 1.0);
    REQUIRE(energy(s) < 0);
    const auto out = run_with_monitors(s, c);
    INFO(out.reason);
    CHECK(out.status == EvolutionStatus::BlownUp);
    CHECK(out.t_detect > 0);
    CHECK(out.t_detect < 1);
  }
}

TEST_CASE("virial identity along a dispersing evolution") {
  const auto s = shg3_gaussian(GridSpec::cartesian(1, 512, 40), 1.0, 1.0);
  EvolveConfig c;
  c.dt = 2e-3;
  c.t_end = 1;
  c.sample_every = 5;
  const auto out = run_with_monitors(s, c);
  CHECK(virial_check(out.diagnostics, energy(s), 1) < 1e-3);
}

TEST_CASE("snapshots are written when requested") {
  const auto dir = std::filesystem::temp_directory_path() / "qnls_test_evolve_snaps";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  EvolveConfig c;
  c.dt = 0.01;
  c.t_end = 0.2;
  c.sample_every = 5;
  c.snapshot_dir = dir;
  c.snapshot_every = 1;
  const auto s = shg3_gaussian(GridSpec::radial(2, 64, 8), 0.5);
  run_with_monitors(s, c);
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    ++files;
    CHECK(read_snapshot(e.path(), s.model).grid == s.grid);
  }
  CHECK(files >= 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pseudo-conformal family argument checks") {
  const auto s = shg3_gaussian(GridSpec::radial(3, 64, 8), 1.0);
  CHECK_THROWS(pseudo_conformal_solution(s, 1, 0));
  const auto s4 = shg3_gaussian(GridSpec::radial(4, 64, 8), 1.0);
  CHECK_THROWS(pseudo_conformal_solution(s4, 1, 1));
  CHECK_THROWS(pseudo_conformal_solution(s4, -1, 0));
  const auto v = pseudo_conformal_solution(s4, 1, 0.5);
  CHECK(v.grid.extent == doctest::Approx(4));
  CHECK(charge(v) == doctest::Approx(charge(s4)).epsilon(1e-12));
}
