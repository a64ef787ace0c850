#include "qnls/groundstate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qnls {

namespace {

// Solves (a (-Lap) + b) x = rhs in place.
void solve_shifted_laplacian(Field& x, double a, double b) {
  const auto& g = x.grid();
  const auto& geo = geometry(g);
  auto v = x.values();
  if (g.kind == GridKind::Cartesian) {
    const double M = static_cast<double>(g.size());
    fft_forward(g, v);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] /= (a * geo.xi_sq[i] + b) * M;
    fft_backward(g, v);
    return;
  }
  const int N = g.points;
  const double h = g.spacing();
  std::vector<double> cprime(N);
  std::vector<double> denom(N);
  for (int i = 0; i < N; ++i) {
    const double w = h * geo.weight[i];
    const double fl = i > 0 ? geo.face[i - 1] : 0.0;
    const double fr = geo.face[i];
    const double lo = -a * fl / w;
    const double di = a * (fl + fr) / w + b;
    const double up = i + 1 < N ? -a * fr / w : 0.0;
    denom[i] = i > 0 ? di - lo * cprime[i - 1] : di;
    cprime[i] = up / denom[i];
    v[i] = (v[i] - (i > 0 ? lo * v[i - 1] : cplx{})) / denom[i];
  }
  for (int i = N - 2; i >= 0; --i) v[i] -= cprime[i] * v[i + 1];
}

std::vector<Field> eval_f(const FieldState& s) {
  const int l = s.model.components();
  std::vector<Field> f(l, Field(s.grid));
  std::vector<cplx> z(l), out(l);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    for (int k = 0; k < l; ++k) z[k] = s.components[k][i];
    s.model.eval_fk(z, out);
    for (int k = 0; k < l; ++k) f[k][i] = out[k];
  }
  return f;
}

double inner_re(const Field& a, const Field& b) {
  const auto& w = geometry(a.grid()).weight;
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += w[i] * std::real(std::conj(a[i]) * b[i]);
  return acc;
}

double sup_abs(const Field& f) {
  double m = 0;
  for (auto v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

// -gamma Lap psi + b psi
Field apply_L(const Field& psi, double gamma, double b) {
  Field out = laplacian(psi);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = -gamma * out[i] + b * psi[i];
  return out;
}

bool supports_rearrangement(const GridSpec& g) { return g.kind == GridKind::Radial || g.dim == 1; }

struct Candidate {
  FieldState state;
  double score;
};

double petviashvili_S(const FieldState& s, double omega, bool& degenerate) {
  const auto& c = s.model.coeffs();
  const auto f = eval_f(s);
  double num = 0, den = 0;
  degenerate = false;
  for (int k = 0; k < s.model.components(); ++k) {
    if (sup_abs(f[k]) == 0) degenerate = true;
    num += inner_re(apply_L(s.components[k], c.gamma[k], c.b(k, omega)), s.components[k]);
    den += inner_re(f[k], s.components[k]);
  }
  return den > 0 ? num / den : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<double> elliptic_residual(const FieldState& s, double omega) {
  const auto& c = s.model.coeffs();
  const auto f = eval_f(s);
  std::vector<double> r;
  for (int k = 0; k < s.model.components(); ++k) {
    Field d = apply_L(s.components[k], c.gamma[k], c.b(k, omega));
    for (std::size_t i = 0; i < d.size(); ++i) d[i] -= f[k][i];
    r.push_back(sup_abs(d));
  }
  return r;
}

GroundStateResult petviashvili_solve(const FieldState& init, double omega, const GroundStateOptions& opt) {
  init.validate();
  require_admissible(init.model, omega);
  const auto& c = init.model.coeffs();
  const int l = init.model.components();
  FieldState psi = init;
  for (auto& comp : psi.components)
    for (auto& v : comp.values()) {
      if (std::abs(v.imag()) > 1e-12 * (1 + std::abs(v.real())) || v.real() < 0)
        throw std::invalid_argument("initial guess must be real and non-negative");
      v = v.real();
    }
  double S = 0, residual = 0;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const auto f = eval_f(psi);
    double num = 0, den = 0;
    residual = 0;
    std::vector<Field> Lpsi;
    for (int k = 0; k < l; ++k) {
      Lpsi.push_back(apply_L(psi.components[k], c.gamma[k], c.b(k, omega)));
      num += inner_re(Lpsi[k], psi.components[k]);
      den += inner_re(f[k], psi.components[k]);
      Field d = Lpsi[k];
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= f[k][i];
      residual = std::max(residual, sup_abs(d));
    }
    S = num / den;
    if (!(den > 0) || !(S >= 1e-6 && S <= 1e6)) throw std::runtime_error("Petviashvili iteration diverged");
    if (residual < opt.residual_tol && std::abs(S - 1) < opt.tol) {
      GroundStateResult r{psi, omega, residual, elliptic_functionals(psi, omega)};
      r.pohozaev_dev = pohozaev_check(psi, omega);
      r.S = S;
      r.iterations = it;
      return r;
    }
    for (int k = 0; k < l; ++k) {
      Field next = f[k];
      solve_shifted_laplacian(next, c.gamma[k], c.b(k, omega));
      for (std::size_t i = 0; i < next.size(); ++i) psi.components[k][i] = std::max(
            0.0, (1 - opt.relaxation) * psi.components[k][i].real() + opt.relaxation * S * S * next[i].real());
    }
  }
  throw std::runtime_error("Petviashvili iteration did not converge (residual " + std::to_string(residual) + ")");
}

GroundStateResult petviashvili_solve(const ModelSpec& model, double omega, const GridSpec& grid,
                                     const GroundStateOptions& opt) {
  grid.validate();
  require_admissible(model, omega);
  const int l = model.components();
  if (opt.amplitude_scan.empty()) throw std::invalid_argument("empty amplitude scan");
  std::vector<Candidate> candidates;
  std::vector<std::size_t> idx(l, 0);
  const double w2 = opt.init_width * opt.init_width;
  while (true) {
    FieldState s = make_state(model, grid, [&](int k, std::span<const double> x) {
      double r2 = 0;
      for (double xi : x) r2 += xi * xi;
      return cplx(opt.amplitude_scan[idx[k]] * std::exp(-r2 / w2));
    });
    if (supports_rearrangement(grid))
      for (auto& comp : s.components) comp = symmetric_decreasing_rearrangement(comp);
    bool degenerate = false;
    const double S0 = petviashvili_S(s, omega, degenerate);
    if (!degenerate && std::isfinite(S0)) candidates.push_back({std::move(s), std::abs(S0 - 1)});
    int k = 0;
    while (k < l && ++idx[k] == opt.amplitude_scan.size()) idx[k++] = 0;
    if (k == l) break;
  }
  if (candidates.empty()) throw std::runtime_error("no admissible initial guess: some f_k vanishes identically");
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
  std::string last_error;
  const int tries = std::min<int>(candidates.size(), std::max(1, opt.max_restarts));
  for (int t = 0; t < tries; ++t) {
    try {
      return petviashvili_solve(candidates[t].state, omega, opt);
    } catch (const std::runtime_error& e) {
      last_error = e.what();
    }
  }
  throw std::runtime_error(last_error);
}

std::array<double, 3> pohozaev_check(const FieldState& s, double omega) {
  const int n = s.grid.dim;
  if (n >= 6) throw std::invalid_argument("no nontrivial solutions exist when 6 - n <= 0");
  const auto e = elliptic_functionals(s, omega);
  if (!(e.I > 0)) throw std::runtime_error("action I <= 0: not a solution");
  return {std::abs(e.P - 2 * e.I) / e.I, std::abs(e.K - n * e.I) / e.I, std::abs(e.Qw - (6 - n) * e.I) / e.I};
}

std::array<double, 3> pohozaev_check(const GroundStateResult& r, int n) {
  if (n >= 6) throw std::invalid_argument("no nontrivial solutions exist when 6 - n <= 0");
  if (n != r.profile.grid.dim) throw std::invalid_argument("dimension does not match the result grid");
  return pohozaev_check(r.profile, r.omega);
}

FieldState normalize_KQ1(const FieldState& s, double omega) {
  const double K = kinetic(s);
  const double Q = charge_omega(s, omega);
  if (!(K > 0 && Q > 0)) throw std::invalid_argument("normalization needs K > 0 and Qw > 0");
  const double n = s.grid.dim;
  const double t = std::pow(Q, n / 4 - 0.5) / std::pow(K, n / 4);
  return s.dilated(std::sqrt(K / Q)).scaled(t);
}

FieldState scale_to_solution(const FieldState& normalized, double xi1, int n) {
  if (n < 1 || n > 5) throw std::invalid_argument("scale_to_solution needs 1 <= n <= 5");
  return normalized.dilated(std::sqrt((6.0 - n) / n)).scaled(2 * xi1 / (6 - n));
}

double xi1_of(const GroundStateResult& r) { return xi1_from_charge(r.functionals.Qw, r.profile.grid.dim); }

ConstrainedMinResult constrained_minimize(const ModelSpec& model, double nu, const GridSpec& grid,
                                          const ConstrainedMinOptions& opt) {
  grid.validate();
  if (grid.dim < 1 || grid.dim > 3) throw std::invalid_argument("constrained minimization needs 1 <= n <= 3");
  if (!(nu > 0)) throw std::invalid_argument("nu must be positive");
  const auto& c = model.coeffs();
  const int l = model.components();
  const double w2 = opt.init_width * opt.init_width;
  FieldState phi = make_state(model, grid, [&](int, std::span<const double> x) {
    double r2 = 0;
    for (double xi : x) r2 += xi * xi;
    return cplx(std::exp(-r2 / w2));
  });
  phi = phi.scaled(std::sqrt(nu / charge(phi)));
  double residual = 0;
  for (int it = 0; it <= opt.max_iterations; ++it) {
    const auto f = eval_f(phi);
    const double theta = (kinetic(phi) + linear_potential(phi) - 3 * interaction(phi)) / charge(phi);
    if (it % 10 == 0) {
      residual = 0;
      for (int k = 0; k < l; ++k) {
        Field d = apply_L(phi.components[k], c.gamma[k], c.beta[k]);
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= f[k][i] + theta * c.charge_weight(k) * phi.components[k][i];
        residual = std::max(residual, sup_abs(d));
      }
      if (!std::isfinite(residual)) throw std::runtime_error("constrained minimization diverged");
      if (residual < opt.tol) return {nu, phi, energy(phi), theta, -theta, residual, it};
    }
    // theta keeps exact Euler-Lagrange solutions fixed without rescaling, so fixed points of the
    // normalized step are solutions at charge nu
    for (int k = 0; k < l; ++k) {
      const double g = c.gamma[k] / (c.alpha[k] * c.alpha[k]);
      Field& u = phi.components[k];
      for (std::size_t i = 0; i < u.size(); ++i)
        u[i] += opt.dtau * g * (f[k][i] + theta * c.charge_weight(k) * u[i]);
      solve_shifted_laplacian(u, opt.dtau * g * c.gamma[k], 1 + opt.dtau * g * c.beta[k]);
    }
    phi = phi.scaled(std::sqrt(nu / charge(phi)));
  }
  throw std::runtime_error("constrained minimization did not converge (residual " + std::to_string(residual) + ")");
}

FieldState l2_dilation(const FieldState& s, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  return s.dilated(1 / lambda).scaled(std::pow(lambda, 0.5 * s.grid.dim));
}

double lambda_star(const FieldState& s) {
  if (s.grid.dim != 5) throw std::invalid_argument("lambda_star is defined for n = 5");
  const double P = interaction(s);
  if (!(P > 0)) throw std::invalid_argument("lambda_star needs P > 0");
  const double r = 2 * kinetic(s) / (5 * P);
  return r * r;
}

InstabilityDatum instability_initializer(const FieldState& ground, double eps_or_lambda) {
  const int n = ground.grid.dim;
  if (n == 4) {
    const double eps = eps_or_lambda;
    if (!(eps > 0)) throw std::invalid_argument("epsilon must be positive");
    return {ground.scaled(1 + eps), -2 * (1 + eps) * (1 + eps) * eps * interaction(ground)};
  }
  if (n == 5) {
    if (!(eps_or_lambda > 1)) throw std::invalid_argument("lambda must exceed 1");
    return {l2_dilation(ground, eps_or_lambda), std::nullopt};
  }
  throw std::invalid_argument("instability data exist for n = 4 and n = 5");
}

InstabilityData5D instability_data_5d(const FieldState& ground, const std::vector<double>& lambdas) {
  InstabilityData5D d;
  d.lambda_star = lambda_star(ground);
  for (double lam : lambdas) d.T_at_lambda.emplace_back(lam, T_functional(l2_dilation(ground, lam)));
  d.m = action(l2_dilation(ground, d.lambda_star), 1);
  return d;
}

double peak_position(const FieldState& s) {
  if (s.grid.kind != GridKind::Cartesian || s.grid.dim != 1)
    throw std::invalid_argument("peak_position needs a Cartesian n = 1 grid");
  const int N = s.grid.points;
  std::vector<double> d(N, 0.0);
  for (const auto& comp : s.components)
    for (int j = 0; j < N; ++j) d[j] += std::norm(comp[j]);
  const int j = static_cast<int>(std::max_element(d.begin(), d.end()) - d.begin());
  const double dm = d[(j + N - 1) % N], d0 = d[j], dp = d[(j + 1) % N];
  const double curv = dm - 2 * d0 + dp;
  const double delta = curv != 0 ? 0.5 * (dm - dp) / curv : 0.0;
  const double h = s.grid.spacing();
  double x = (j + delta) * h;

  // Newton on the derivative of the trigonometric interpolant of the density
  std::vector<cplx> c(d.begin(), d.end());
  fft_forward(s.grid, c);
  const double L = 2 * s.grid.extent;
  for (int it = 0; it < 8; ++it) {
    double d1 = 0, d2 = 0;
    for (int m = 1; m < N / 2; ++m) {
      const double k = 2 * std::numbers::pi * m / L;
      const cplx e = c[m] * std::polar(1.0, k * x);
      d1 += -2 * k * e.imag();
      d2 += -2 * k * k * e.real();
    }
    if (!(d2 < 0)) break;
    const double dx = -d1 / d2;
    x += std::clamp(dx, -h, h);
    if (std::abs(dx) < 1e-14 * L) break;
  }
  return -s.grid.extent + x;
}

namespace {

double best_phase(const FieldState& s, const FieldState& ref) {
  const int l = s.model.components();
  std::vector<cplx> overlap(l);
  std::vector<double> sigma(l);
  for (int k = 0; k < l; ++k) {
    const auto& w = geometry(s.grid).weight;
    cplx acc{};
    for (std::size_t i = 0; i < s.grid.size(); ++i) acc += w[i] * std::conj(ref.components[k][i]) * s.components[k][i];
    overlap[k] = acc;
    sigma[k] = s.model.coeffs().sigma(k);
  }
  auto score = [&](double th) {
    double acc = 0;
    for (int k = 0; k < l; ++k) acc += std::real(std::polar(1.0, -sigma[k] * th) * overlap[k]);
    return acc;
  };
  const int samples = 4000;
  const double span = 2 * std::numbers::pi;
  const double step = 2 * span / samples;
  double best = -span, best_val = score(best);
  for (int i = 1; i <= samples; ++i) {
    const double th = -span + i * step;
    const double v = score(th);
    if (v > best_val) best_val = v, best = th;
  }
  double a = best - step, b = best + step;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int i = 0; i < 100; ++i) {
    const double x1 = b - g * (b - a), x2 = a + g * (b - a);
    if (score(x1) > score(x2))
      b = x2;
    else
      a = x1;
  }
  return 0.5 * (a + b);
}

FieldState align(const FieldState& s, const FieldState& ref, double& shift, double& theta) {
  if (!(s.grid == ref.grid)) throw std::invalid_argument("states live on different grids");
  FieldState out = s;
  shift = 0;
  if (s.grid.kind == GridKind::Cartesian && s.grid.dim == 1) {
    shift = peak_position(ref) - peak_position(s);
    for (auto& comp : out.components) comp = translate(comp, shift);
  }
  theta = best_phase(out, ref);
  for (int k = 0; k < out.model.components(); ++k) {
    const cplx ph = std::polar(1.0, -out.model.coeffs().sigma(k) * theta);
    for (auto& v : out.components[k].values()) v *= ph;
  }
  return out;
}

}  // namespace

FieldState align_to(const FieldState& s, const FieldState& ref) {
  double shift, theta;
  return align(s, ref, shift, theta);
}

ModulatedDistance modulated_distance(const FieldState& s, const FieldState& ref) {
  ModulatedDistance d;
  const auto aligned = align(s, ref, d.shift, d.theta);
  double l2 = 0, l2ref = 0, h1 = 0, h1ref = 0;
  for (int k = 0; k < s.model.components(); ++k) {
    Field diff = aligned.components[k];
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= ref.components[k][i];
    const double a = norm_sq(diff), b = norm_sq(ref.components[k]);
    l2 += a;
    l2ref += b;
    h1 += a + grad_sq_integral(diff);
    h1ref += b + grad_sq_integral(ref.components[k]);
    d.linf = std::max(d.linf, sup_abs(diff));
  }
  d.l2 = std::sqrt(l2 / l2ref);
  d.h1 = std::sqrt(h1 / h1ref);
  return d;
}

void write_groundstate_archive(const std::filesystem::path& path, const GroundStateResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_snapshot(out, r.profile);
  std::ostringstream t;
  t.precision(17);
  const auto& e = r.functionals;
  t << "omega=" << r.omega << "\nI=" << e.I << "\nK=" << e.K << "\nQw=" << e.Qw << "\nP=" << e.P << "\nQ=" << e.Q
    << "\nresidual=" << r.residual << "\npohozaev_dev=" << r.pohozaev_dev[0] << "," << r.pohozaev_dev[1] << ","
    << r.pohozaev_dev[2] << "\niterations=" << r.iterations << "\nS=" << r.S << "\n";
  out << t.str();
  if (!out) throw std::runtime_error("archive write failed");
}

GroundStateResult read_groundstate_archive(const std::filesystem::path& path, const ModelSpec& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  FieldState s = read_snapshot(in, model);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed archive trailer: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"omega", "I", "K", "Qw", "P", "Q", "residual", "pohozaev_dev"})
    if (!kv.count(key)) throw std::runtime_error(std::string("archive trailer lacks ") + key);
  const double omega = std::stod(kv["omega"]);
  GroundStateResult r{s, omega, std::stod(kv["residual"]), elliptic_functionals(s, omega)};
  r.functionals.I = std::stod(kv["I"]);
  r.functionals.K = std::stod(kv["K"]);
  r.functionals.Qw = std::stod(kv["Qw"]);
  r.functionals.P = std::stod(kv["P"]);
  r.functionals.Q = std::stod(kv["Q"]);
  std::istringstream dev(kv["pohozaev_dev"]);
  std::string part;
  for (int i = 0; i < 3 && std::getline(dev, part, ','); ++i) r.pohozaev_dev[i] = std::stod(part);
  if (kv.count("iterations")) r.iterations = std::stoi(kv["iterations"]);
  if (kv.count("S")) r.S = std::stod(kv["S"]);
  return r;
}

}  // namespace qnls
