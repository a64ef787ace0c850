#include <doctest.h>

#include <random>

#include "qnls/nonlinearity.hpp"

using namespace qnls;

namespace {

std::vector<cplx> random_point(std::mt19937_64& rng, int l) {
  std::normal_distribution<double> N;
  std::vector<cplx> z(l);
  for (auto& v : z) v = {N(rng), N(rng)};
  return z;
}

// f_k written out by hand from F
std::vector<cplx> hand_fk(const std::string& model, const std::vector<cplx>& z, double chi) {
  auto c = [](cplx v) { return std::conj(v); };
  if (model == "shg3") return {0.5 * (chi * z[1] * z[1] + z[2] * z[2]), chi * z[0] * c(z[1]), z[0] * c(z[2])};
  if (model == "cascade3") return {c(z[0]) * z[1] + chi * c(z[1]) * z[2], 0.5 * z[0] * z[0] + chi * c(z[0]) * z[2], chi * z[0] * z[1]};
  return {2.0 * chi * c(z[0]) * z[1], chi * z[0] * z[0]};
}

}  // namespace

TEST_CASE("builtin f_k match hand derivatives") {
  std::mt19937_64 rng(7);
  for (const auto& name : builtin_model_names()) {
    ModelParams p;
    p.chi = 0.7;
    const auto m = builtin_model(name, p);
    std::vector<cplx> out(m.components());
    for (int s = 0; s < 50; ++s) {
      const auto z = random_point(rng, m.components());
      m.eval_fk(z, out);
      const auto ref = hand_fk(name, z, 0.7);
      for (int k = 0; k < m.components(); ++k) CHECK(std::abs(out[k] - ref[k]) < 1e-13 * (1 + std::abs(ref[k])));
    }
  }
}

TEST_CASE("builtin models pass every hypothesis") {
  for (const auto& name : builtin_model_names()) {
    const auto r = validate_hypotheses(builtin_model(name), 1000, 0);
    for (const auto& c : r.checks) {
      INFO(name << " " << c.id << " deviation " << c.deviation);
      CHECK(c.pass);
      CHECK(c.deviation < 1e-10);
    }
  }
}

TEST_CASE("mass balance and degree identity hold pointwise") {
  std::mt19937_64 rng(3);
  for (const auto& name : builtin_model_names()) {
    const auto m = builtin_model(name);
    const auto& c = m.coeffs();
    std::vector<cplx> f(m.components());
    double worst_im = 0, worst_deg = 0;
    for (int s = 0; s < 1000; ++s) {
      const auto z = random_point(rng, m.components());
      m.eval_fk(z, f);
      cplx a{}, b{};
      for (int k = 0; k < m.components(); ++k) {
        a += c.sigma(k) * f[k] * std::conj(z[k]);
        b += f[k] * std::conj(z[k]);
      }
      worst_im = std::max(worst_im, std::abs(a.imag()));
      worst_deg = std::max(worst_deg, std::abs(b.real() - 3 * m.F(z).real()));
    }
    CHECK(worst_im < 1e-12);
    CHECK(worst_deg < 1e-12);
    CHECK(check_mass_balance(m) < 1e-12);
    CHECK(check_degree_identity(m) < 1e-12);
  }
}

TEST_CASE("z1 z2 z3 with equal sigma breaks the gauge") {
  const ModelSpec m("bad", {{1, 1, 1}, {1, 1, 1}, {0, 0, 0}}, TrilinearPotential(3, {{1.0, {1, 1, 1}, {0, 0, 0}}}));
  CHECK(check_gauge(m).max() > 0.1);
  CHECK_FALSE(check_gauge_symbolic(m));
  CHECK_FALSE(m.validation().at("H4").pass);
  CHECK_FALSE(m.validation().all_pass());
}

TEST_CASE("empty potential passes trivially") {
  const ModelSpec m("free", {{1, 2}, {1, 1}, {0, 0}}, TrilinearPotential(2, {}));
  CHECK(m.validation().all_pass());
  std::vector<cplx> z{{1, 2}, {3, -1}}, f(2);
  m.eval_fk(z, f);
  CHECK(f[0] == cplx{});
  CHECK(f[1] == cplx{});
}

TEST_CASE("uv2 gauge needs kappa = 1/2") {
  CHECK(check_gauge_symbolic(builtin_model("uv2")));
  ModelParams p;
  p.kappa = 1;
  CHECK_FALSE(check_gauge_symbolic(builtin_model("uv2", p)));
}

TEST_CASE("polynomial algebra") {
  // P = 2 z0^2 conj(z1) + i z1
  const Polynomial P(2, {{2.0, {2, 0}, {0, 1}}, {cplx(0, 1), {0, 1}, {0, 0}}});
  std::vector<cplx> z{{0.3, -0.4}, {1.1, 0.2}};
  CHECK(std::abs(P(z) - (2.0 * z[0] * z[0] * std::conj(z[1]) + cplx(0, 1) * z[1])) < 1e-14);
  CHECK(std::abs(P.d_dz(0)(z) - 4.0 * z[0] * std::conj(z[1])) < 1e-14);
  CHECK(std::abs(P.d_dzbar(1)(z) - 2.0 * z[0] * z[0]) < 1e-14);
  CHECK(std::abs(P.conjugate()(z) - std::conj(P(z))) < 1e-14);
  CHECK(P.degree() == 3);
  CHECK_FALSE(P.homogeneous());
  // like terms merge and cancel
  const Polynomial Z(1, {{1.0, {1}, {1}}, {-1.0, {1}, {1}}});
  CHECK(Z.empty());
  CHECK(Z.degree() == -1);
  CHECK((P + P)(z) == 2.0 * P(z));
}

TEST_CASE("real cross partial matches finite differences") {
  const auto m = builtin_model("cascade3");
  const auto& F = m.potential().polynomial();
  std::vector<double> y{0.4, 0.7, 0.2};
  auto reF = [&](std::vector<double> v) {
    std::vector<cplx> z(v.begin(), v.end());
    return F(z).real();
  };
  const double h = 1e-4;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      auto pp = y, pm = y, mp = y, mm = y;
      pp[i] += h, pp[j] += h;
      pm[i] += h, pm[j] -= h;
      mp[i] -= h, mp[j] += h;
      mm[i] -= h, mm[j] -= h;
      const double fd = (reF(pp) - reF(pm) - reF(mp) + reF(mm)) / (4 * h * h);
      CHECK(F.real_cross_partial(y, i, j) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("degree other than three is rejected") {
  CHECK_THROWS_AS(TrilinearPotential(2, {{1.0, {1, 1}, {0, 0}}}), std::invalid_argument);
  CHECK_THROWS_AS(TrilinearPotential(2, {{1.0, {1, 1, 1}, {0, 0}}}), std::invalid_argument);
}

TEST_CASE("coefficient validation") {
  CHECK_THROWS(CoefficientSet{{1, 0}, {1, 1}, {0, 0}}.validate());
  CHECK_THROWS(CoefficientSet{{1, 1}, {1, -1}, {0, 0}}.validate());
  CHECK_THROWS(CoefficientSet{{1, 1}, {1}, {0, 0}}.validate());
  CHECK_NOTHROW(CoefficientSet{{2, 1}, {1, 0.5}, {0, 0.3}}.validate());
  const CoefficientSet c{{2, 1}, {1, 0.5}, {0, 0.3}};
  CHECK(c.sigma(1) == 2);
  CHECK(c.charge_weight(0) == 4);
  CHECK(c.b(1, 2.0) == doctest::Approx(2 * 2.0 + 0.3));
}

TEST_CASE("model text round trip") {
  ModelParams p;
  p.chi = 0.25;
  p.beta = std::vector<double>{0.1, 0.2, 0.3};
  const auto m = builtin_model("cascade3", p);
  const auto back = parse_model_text(format_model_text(m));
  CHECK(back.name() == "cascade3");
  CHECK(back.coeffs().alpha == m.coeffs().alpha);
  CHECK(back.coeffs().beta == m.coeffs().beta);
  std::mt19937_64 rng(1);
  for (int s = 0; s < 20; ++s) {
    const auto z = random_point(rng, 3);
    CHECK(std::abs(back.F(z) - m.F(z)) < 1e-14);
  }
}

TEST_CASE("model text errors") {
  CHECK_THROWS_AS(parse_model_text("l=2\nalpha=1,1\ngamma=1,1\nbogus=3\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model_text("alpha=1\ngamma=1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model_text("l=2\nalpha=1\ngamma=1,1\n"), std::invalid_argument);
  CHECK_THROWS_AS(parse_model_text("l=1\nalpha=1\ngamma=1\nterm=1,0;p=1;q=1\n"), std::invalid_argument);
  CHECK_THROWS_AS(builtin_model("nope"), std::invalid_argument);
  const auto m = parse_model_text("# comment\nl=1\nalpha=1\ngamma=1\nterm=1,0;p=2;q=1  # |z|^2 z\n");
  CHECK(m.components() == 1);
  CHECK(m.coeffs().beta == std::vector<double>{0});
}

TEST_CASE("sampling is reproducible") {
  const auto m = builtin_model("shg3");
  CHECK(check_wirtinger(m, 200, 5) == check_wirtinger(m, 200, 5));
  CHECK(check_gauge(m, 200, 5).max() == check_gauge(m, 200, 5).max());
}
