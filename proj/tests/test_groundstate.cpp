#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "qnls/groundstate.hpp"

using namespace qnls;

namespace {

// uv2 with kappa = 1: psi_2 = 3 omega / (4 chi) sech^2(sqrt(omega) x / 2), psi_1 = sqrt(2) psi_2
double exact_uv2(int k, double x, double omega, double chi) {
  const double s = 1 / std::cosh(std::sqrt(omega) * x / 2);
  const double p2 = 3 * omega / (4 * chi) * s * s;
  return k == 0 ? std::sqrt(2.0) * p2 : p2;
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

const GroundStateResult& uv2_ground() {
  static const auto r = petviashvili_solve(builtin_model("uv2"), 1.0, GridSpec::cartesian(1, 256, 30));
  return r;
}

}  // namespace

TEST_CASE("uv2 with kappa = 1 reproduces the sech^2 solution") {
  ModelParams p;
  p.kappa = 1;
  p.chi = 0.8;
  for (double omega : {1.0, 2.0}) {
    const auto r = petviashvili_solve(builtin_model("uv2", p), omega, GridSpec::cartesian(1, 512, 30));
    CHECK(r.residual < 1e-9);
    CHECK(std::abs(r.S - 1) < 1e-9);
    const double h = r.profile.grid.spacing();
    double err = 0;
    for (int k = 0; k < 2; ++k)
      for (int j = 0; j < r.profile.grid.points; ++j) {
        const double x = -30 + j * h;
        err = std::max(err, std::abs(r.profile.components[k][j] - exact_uv2(k, x, omega, 0.8)));
      }
    INFO("omega=" << omega);
    CHECK(err < 1e-7);
  }
}

TEST_CASE("Pohozaev identities converge at second order on radial grids") {
  for (int n = 2; n <= 4; ++n) {
    std::vector<double> dev;
    for (int N : {200, 400}) {
      const auto r = petviashvili_solve(builtin_model("shg3"), 1.0, GridSpec::radial(n, N, 12));
      CHECK(r.residual < 1e-8);
      const auto d = pohozaev_check(r, n);
      CHECK(d == r.pohozaev_dev);
      dev.push_back(std::max({d[0], d[1], d[2]}));
    }
    INFO("n=" << n << " " << dev[0] << " " << dev[1]);
    CHECK(dev[1] < 1e-2);
    CHECK(dev[0] / dev[1] > 3);
  }
}

TEST_CASE("six or more dimensions are refused") {
  const auto& r = uv2_ground();
  CHECK_THROWS_WITH(pohozaev_check(r, 6), doctest::Contains("no nontrivial solutions"));
}

TEST_CASE("elliptic residual flags non-solutions") {
  const auto s = make_state(builtin_model("uv2"), GridSpec::cartesian(1, 128, 20),
                            [](int, std::span<const double> x) { return cplx(std::exp(-x[0] * x[0])); });
  for (double r : elliptic_residual(s, 1.0)) CHECK(r > 1e-2);
  for (double r : elliptic_residual(uv2_ground().profile, 1.0)) CHECK(r < 1e-8);
  CHECK_THROWS(petviashvili_solve(builtin_model("uv2"), -1.0, GridSpec::cartesian(1, 64, 10)));
}

TEST_CASE("normalization and rescaling") {
  const auto& r = uv2_ground();
  const auto N = normalize_KQ1(r.profile, 1.0);
  CHECK(kinetic(N) == doctest::Approx(1).epsilon(1e-12));
  CHECK(charge_omega(N, 1.0) == doctest::Approx(1).epsilon(1e-12));
  CHECK(*weinstein_J(N, 1.0) == doctest::Approx(*weinstein_J(r.profile, 1.0)).epsilon(1e-12));
  const double xi1 = xi1_of(r);
  CHECK(xi1 == doctest::Approx(*weinstein_J(r.profile, 1.0)).epsilon(1e-4));
  // the rescaled normalized profile solves the omega = 1 equation and equals the ground state
  const auto back = scale_to_solution(N, xi1, 1);
  for (double v : elliptic_residual(back, 1.0)) CHECK(v < 1e-5);
  CHECK(relative_l2(back, r.profile) < 1e-5);
}

TEST_CASE("ground state is a local minimum of J") {
  const auto& r = uv2_ground();
  const double J0 = *weinstein_J(r.profile, 1.0);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double c = 5 * U(rng), a = 0.05 * U(rng);
    auto s = r.profile;
    const int k = trial % 2;
    for (int j = 0; j < s.grid.points; ++j) {
      const double x = -30 + j * s.grid.spacing();
      s.components[k][j] += a * std::exp(-(x - c) * (x - c));
    }
    CHECK(*weinstein_J(s, 1.0) >= J0 * (1 - 1e-12));
  }
}

TEST_CASE("instability data in five dimensions") {
  const auto r = petviashvili_solve(builtin_model("shg3"), 1.0, GridSpec::radial(5, 400, 12));
  const auto& s = r.profile;
  const double K = kinetic(s), P = interaction(s);
  const double ls = lambda_star(s);
  CHECK(ls == doctest::Approx(std::pow(2 * K / (5 * P), 2)).epsilon(1e-14));
  CHECK(std::abs(T_functional(l2_dilation(s, ls))) < 1e-10 * K);
  // dI/dlambda at psi^lambda equals T(psi^lambda) / lambda
  for (double lam : {0.8, 1.2}) {
    const double h = 1e-5;
    const double fd = (action(l2_dilation(s, lam + h), 1.0) - action(l2_dilation(s, lam - h), 1.0)) / (2 * h);
    CHECK(fd == doctest::Approx(T_functional(l2_dilation(s, lam)) / lam).epsilon(1e-6));
  }
  const auto d = instability_data_5d(s, {0.5, 1.0, 4.0});
  CHECK(d.lambda_star == doctest::Approx(ls));
  REQUIRE(d.T_at_lambda.size() == 3);
  CHECK(d.T_at_lambda[2].second == doctest::Approx(16 * K - 80 * P).epsilon(1e-12));
  CHECK(d.m == doctest::Approx(action(l2_dilation(s, ls), 1.0)).epsilon(1e-12));
  CHECK(charge(l2_dilation(s, 1.7)) == doctest::Approx(charge(s)).epsilon(1e-12));

  const auto datum = instability_initializer(s, 1.5);
  CHECK(relative_l2(datum.state, l2_dilation(s, 1.5)) == 0);
  CHECK_FALSE(datum.predicted_energy);
  CHECK_THROWS(instability_initializer(s, 1.0));
}

TEST_CASE("instability data in four dimensions") {
  const auto r = petviashvili_solve(builtin_model("shg3"), 1.0, GridSpec::radial(4, 400, 12));
  const auto& s = r.profile;
  const double eps = 0.1, P = interaction(s);
  const auto d = instability_initializer(s, eps);
  REQUIRE(d.predicted_energy);
  CHECK(*d.predicted_energy == doctest::Approx(-2 * 1.1 * 1.1 * eps * P));
  const double K = kinetic(s);
  CHECK(energy(d.state) == doctest::Approx(1.21 * K - 2 * 1.331 * P).epsilon(1e-12));
  // the prediction assumes K = 2P, which the discrete profile meets to Pohozaev accuracy
  CHECK(std::abs(energy(d.state) - *d.predicted_energy) < 1.21 * std::abs(K - 2 * P) * (1 + 1e-9));
  CHECK(std::abs(K - 2 * P) < 1e-2 * K);
  CHECK(charge(d.state) == doctest::Approx(1.21 * charge(s)));
  CHECK_THROWS(instability_initializer(s, 0));
  CHECK_THROWS(instability_initializer(uv2_ground().profile, 0.1));
}

TEST_CASE("constrained minimization recovers the ground state") {
  const auto& g = uv2_ground();
  const double nu = charge(g.profile);
  const auto m = constrained_minimize(builtin_model("uv2"), nu, g.profile.grid);
  CHECK(m.residual < 1e-8);
  CHECK(charge(m.minimizer) == doctest::Approx(nu).epsilon(1e-12));
  CHECK(m.theta == doctest::Approx(-1).epsilon(1e-6));
  CHECK(m.lagrange_omega == doctest::Approx(1).epsilon(1e-6));
  CHECK(m.I_nu == doctest::Approx(energy(g.profile)).epsilon(1e-6));
  CHECK(modulated_distance(m.minimizer, g.profile).h1 < 1e-5);
  CHECK_THROWS(constrained_minimize(builtin_model("shg3"), 1.0, GridSpec::radial(4, 100, 10)));
  CHECK_THROWS(constrained_minimize(builtin_model("uv2"), -1.0, g.profile.grid));
}

TEST_CASE("modulated distance removes translation and phase") {
  const auto& g = uv2_ground();
  const double shift = 2.3, th = 0.9;
  auto s = g.profile;
  for (int k = 0; k < 2; ++k) {
    s.components[k] = translate(s.components[k], shift);
    const cplx ph = std::polar(1.0, s.model.coeffs().sigma(k) * th);
    for (auto& v : s.components[k].values()) v *= ph;
  }
  CHECK(peak_position(s) == doctest::Approx(shift).epsilon(1e-6));
  const auto d = modulated_distance(s, g.profile);
  CHECK(d.h1 < 1e-6);
  CHECK(d.l2 < 1e-6);
  CHECK(d.shift == doctest::Approx(-shift).epsilon(1e-6));
  CHECK(std::remainder(d.theta - th, 2 * std::numbers::pi) == doctest::Approx(0).epsilon(1e-6));
  CHECK(relative_l2(align_to(s, g.profile), g.profile) < 1e-6);
  const auto far = modulated_distance(g.profile.scaled(1.1), g.profile);
  CHECK(far.l2 == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("archive round trip") {
  const auto& r = uv2_ground();
  const auto path = std::filesystem::temp_directory_path() / "qnls_test_ground.qnls";
  write_groundstate_archive(path, r);
  const auto back = read_groundstate_archive(path, builtin_model("uv2"));
  std::filesystem::remove(path);
  CHECK(back.omega == r.omega);
  CHECK(back.iterations == r.iterations);
  CHECK(back.functionals.I == r.functionals.I);
  CHECK(back.functionals.Qw == r.functionals.Qw);
  CHECK(back.pohozaev_dev == r.pohozaev_dev);
  CHECK(relative_l2(back.profile, r.profile) == 0);
  CHECK_THROWS(read_groundstate_archive(path, builtin_model("uv2")));
}
