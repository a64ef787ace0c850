#include "qnls/functionals.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qnls {

namespace {

double weighted_norms(const FieldState& s, const std::function<double(int)>& weight) {
  double sum = 0;
  for (int k = 0; k < static_cast<int>(s.components.size()); ++k) {
    const double w = weight(k);
    if (w != 0) sum += w * norm_sq(s.components[k]);
  }
  return sum;
}

// Sum over nodes of weight_i * g(i, z_i) where z_i gathers all components at node i.
double node_integral(const FieldState& s, const std::function<double(std::size_t, std::span<const cplx>)>& g) {
  const auto& w = geometry(s.grid).weight;
  const std::size_t l = s.components.size();
  std::vector<cplx> z(l);
  double sum = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    for (std::size_t k = 0; k < l; ++k) z[k] = s.components[k][i];
    sum += w[i] * g(i, z);
  }
  return sum;
}

}  // namespace

double charge(const FieldState& s) {
  return weighted_norms(s, [&](int k) { return s.model.coeffs().charge_weight(k); });
}

double charge_omega(const FieldState& s, double omega) {
  return weighted_norms(s, [&](int k) { return s.model.coeffs().b(k, omega); });
}

double kinetic(const FieldState& s) {
  double sum = 0;
  for (int k = 0; k < static_cast<int>(s.components.size()); ++k)
    sum += s.model.coeffs().gamma[k] * grad_sq_integral(s.components[k]);
  return sum;
}

double linear_potential(const FieldState& s) {
  return weighted_norms(s, [&](int k) { return s.model.coeffs().beta[k]; });
}

double interaction(const FieldState& s) {
  if (s.model.potential().terms().empty()) return 0;
  return node_integral(s, [&](std::size_t, std::span<const cplx> z) { return s.model.F(z).real(); });
}

double energy(const FieldState& s) { return kinetic(s) + linear_potential(s) - 2 * interaction(s); }

void require_admissible(const ModelSpec& m, double omega) {
  for (int k = 0; k < m.components(); ++k)
    if (!(m.coeffs().b(k, omega) > 0))
      throw std::invalid_argument("omega is not admissible: some b_k = (alpha_k^2/gamma_k) omega + beta_k <= 0");
}

double action(const FieldState& s, double omega) {
  require_admissible(s.model, omega);
  return 0.5 * (kinetic(s) + charge_omega(s, omega)) - interaction(s);
}

std::optional<double> weinstein_J(const FieldState& s, double omega) {
  const double P = interaction(s);
  if (!(P > 0)) return std::nullopt;
  const double n = s.grid.dim;
  return std::pow(charge_omega(s, omega), 1.5 - n / 4) * std::pow(kinetic(s), n / 4) / P;
}

EllipticFunctionals elliptic_functionals(const FieldState& s, double omega) {
  require_admissible(s.model, omega);
  EllipticFunctionals e;
  e.omega = omega;
  for (int k = 0; k < s.model.components(); ++k) e.b.push_back(s.model.coeffs().b(k, omega));
  e.K = kinetic(s);
  e.Qw = charge_omega(s, omega);
  e.P = interaction(s);
  e.Q = charge(s);
  e.I = 0.5 * (e.K + e.Qw) - e.P;
  if (e.P > 0) {
    const double n = s.grid.dim;
    e.J = std::pow(e.Qw, 1.5 - n / 4) * std::pow(e.K, n / 4) / e.P;
  }
  return e;
}

double xi1_from_charge(double ground_charge_omega, int n) {
  if (n < 1 || n > 5) throw std::invalid_argument("xi1 is defined for 1 <= n <= 5");
  const double nn = n;
  return std::pow(nn, nn / 4) / 2 * std::pow(6 - nn, 1 - nn / 4) * std::sqrt(ground_charge_omega);
}

double sharp_constant(double ground_charge_omega, int n) { return 1 / xi1_from_charge(ground_charge_omega, n); }

VarianceResult variance(const FieldState& s) {
  const auto& geo = geometry(s.grid);
  const auto& c = s.model.coeffs();
  VarianceResult r;
  double total = 0, outer = 0;
  const double edge = 0.9 * s.grid.extent;
  for (int k = 0; k < static_cast<int>(s.components.size()); ++k) {
    const auto& f = s.components[k];
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double m = c.charge_weight(k) * geo.weight[i] * std::norm(f[i]);
      r.V += m * geo.radius_sq[i];
      total += m;
      bool beyond = false;
      if (s.grid.kind == GridKind::Radial) {
        beyond = geo.radius_sq[i] > edge * edge;
      } else {
        for (double x : node_coordinates(s.grid, i)) beyond = beyond || std::abs(x) > edge;
      }
      if (beyond) outer += m;
    }
    r.Vp += 4 * c.alpha[k] * momentum_density_integral(s, k);
  }
  r.outer_fraction = total > 0 ? outer / total : 0;
  r.boundary_warning = r.outer_fraction > 1e-6;
  return r;
}

double virial_rhs(const FieldState& s, double E0) {
  const double n = s.grid.dim;
  return 2 * n * E0 - 2 * n * linear_potential(s) + 2 * (4 - n) * kinetic(s);
}

double virial_rhs_direct(const FieldState& s) {
  return 8 * kinetic(s) - 4.0 * s.grid.dim * interaction(s);
}

namespace cutoff {
namespace {

// chi'' = 2 + sum_j jump_j S((r - start_j) / width), S the C3 smoothstep
constexpr double m_drop = 1093.0 / 126.0;
constexpr double p_rise = 526.0 / 315.0;
constexpr double width = 0.25;
constexpr double jumps[3] = {-(m_drop + 2), p_rise + m_drop, -p_rise};
constexpr double starts[3] = {1.0, 1.5, 2.75};

// m-th derivative of S for m >= 0; m = -1, -2 are first and second antiderivatives.
double step(double s, int m) {
  if (s <= 0) return 0;
  if (s >= 1) {
    const double u = s - 1;
    switch (m) {
      case -2: return 5.0 / 36 + 0.5 * u + 0.5 * u * u;
      case -1: return 0.5 + u;
      case 0: return 1;
      default: return 0;
    }
  }
  const double s2 = s * s, s3 = s2 * s, s4 = s3 * s;
  switch (m) {
    case -2: return s4 * s2 * (7.0 / 6 - 2 * s + 1.25 * s2 - 5.0 / 18 * s3);
    case -1: return s4 * s * (7 - 14 * s + 10 * s2 - 2.5 * s3);
    case 0: return s4 * (35 - 84 * s + 70 * s2 - 20 * s3);
    case 1: return s3 * (140 - 420 * s + 420 * s2 - 140 * s3);
    case 2: return s2 * (420 - 1680 * s + 2100 * s2 - 840 * s3);
    default: throw std::invalid_argument("cutoff derivative order out of range");
  }
}

}  // namespace

double derivative(double r, int m) {
  if (r < 0) throw std::invalid_argument("cutoff needs r >= 0");
  if (r >= 3) return 0;
  double base;
  switch (m) {
    case 0: base = r * r; break;
    case 1: base = 2 * r; break;
    case 2: base = 2; break;
    case 3:
    case 4: base = 0; break;
    default: throw std::invalid_argument("cutoff derivative order out of range");
  }
  for (int j = 0; j < 3; ++j)
    base += jumps[j] * std::pow(width, 2 - m) * step((r - starts[j]) / width, m - 2);
  return base;
}

double chi(double r) { return derivative(r, 0); }

}  // namespace cutoff

namespace {

struct RadialCutoff {
  double lap;   // Delta chi_R
  double bilap; // Delta^2 chi_R
};

RadialCutoff radial_cutoff(double r, double R, int n) {
  if (r <= R) return {2.0 * n, 0.0};
  const double s = r / R;
  const double c1 = R * cutoff::derivative(s, 1);
  const double c2 = cutoff::derivative(s, 2);
  const double c3 = cutoff::derivative(s, 3) / R;
  const double c4 = cutoff::derivative(s, 4) / (R * R);
  const double k = n - 1;
  const double g = c2 + k * c1 / r;
  const double g1 = c3 + k * (c2 / r - c1 / (r * r));
  const double g2 = c4 + k * (c3 / r - 2 * c2 / (r * r) + 2 * c1 / (r * r * r));
  return {g, g2 + k * g1 / r};
}

}  // namespace

double local_virial_rhs(const FieldState& s, double R) {
  if (s.grid.kind != GridKind::Radial) throw std::invalid_argument("local virial needs a radial state");
  if (!(R > 0)) throw std::invalid_argument("cutoff radius must be positive");
  const auto& geo = geometry(s.grid);
  const auto& c = s.model.coeffs();
  const int N = s.grid.points;
  const double h = s.grid.spacing();
  const int n = s.grid.dim;

  double grad = 0, mass = 0;
  for (int k = 0; k < static_cast<int>(s.components.size()); ++k) {
    const auto& f = s.components[k];
    for (int i = 0; i < N; ++i) {
      const cplx next = i + 1 < N ? f[i + 1] : cplx{};
      grad += c.gamma[k] * geo.face[i] * cutoff::derivative((i + 0.5) * h / R, 2) * std::norm(next - f[i]) / h;
      mass += c.gamma[k] * geo.weight[i] * radial_cutoff(i * h, R, n).bilap * std::norm(f[i]);
    }
  }
  double nonlin = 0;
  if (!s.model.potential().terms().empty())
    nonlin = node_integral(s, [&](std::size_t i, std::span<const cplx> z) {
      return radial_cutoff(i * h, R, n).lap * s.model.F(z).real();
    });
  return 2 * (2 * grad - 0.5 * mass - nonlin);
}

double T_functional(const FieldState& s) {
  if (s.grid.dim != 5) throw std::invalid_argument("the instability functional is defined for n = 5");
  return kinetic(s) - 2.5 * interaction(s);
}

double sup_norm(const Field& f) {
  double m = 0;
  for (auto v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

FunctionalSnapshot snapshot(const FieldState& s) {
  FunctionalSnapshot r;
  r.t = s.t;
  r.Q = charge(s);
  r.K = kinetic(s);
  r.L = linear_potential(s);
  r.P = interaction(s);
  r.E = r.K + r.L - 2 * r.P;
  const auto v = variance(s);
  r.V = v.V;
  r.Vp = v.Vp;
  for (const auto& c : s.components) r.linf.push_back(sup_norm(c));
  return r;
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::Global: return "Global";
    case Classification::Blowup: return "Blowup";
    default: return "Indeterminate";
  }
}

ThresholdReport threshold_report(const FieldState& data, const FieldState& ground, double margin) {
  ThresholdReport r;
  r.n = data.grid.dim;
  if (ground.grid.dim != r.n) throw std::invalid_argument("data and ground state live in different dimensions");
  if (r.n != 4 && r.n != 5) throw std::invalid_argument("threshold classification is defined for n = 4 and n = 5");
  r.Q = charge(data);
  r.E = energy(data);
  r.K = kinetic(data);
  r.Q_ground = charge(ground);
  r.E_ground = energy(ground);
  r.K_ground = kinetic(ground);
  if (!(r.Q_ground > 0)) throw std::invalid_argument("ground state has zero charge");
  r.Q_ratio = r.Q / r.Q_ground;
  if (r.n == 4) {
    r.classification = r.Q_ratio < 1 - margin ? Classification::Global : Classification::Indeterminate;
    return r;
  }
  r.QE_ratio = r.Q * r.E / (r.Q_ground * r.E_ground);
  r.QK_ratio = r.Q * r.K / (r.Q_ground * r.K_ground);
  if (r.QE_ratio < 1 - margin && r.QK_ratio < 1 - margin)
    r.classification = Classification::Global;
  else if (r.QE_ratio < 1 - margin && r.QK_ratio > 1 + margin)
    r.classification = Classification::Blowup;
  else
    r.classification = Classification::Indeterminate;
  return r;
}

void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<FunctionalSnapshot>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t l = rows.empty() ? 0 : rows.front().linf.size();
  out << "t,Q,E,K,L,P,V,Vp";
  for (std::size_t k = 1; k <= l; ++k) out << ",linf_" << k;
  out << "\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << put(r.t) << ',' << put(r.Q) << ',' << put(r.E) << ',' << put(r.K) << ',' << put(r.L) << ','
        << put(r.P) << ',' << put(r.V) << ',' << put(r.Vp);
    for (double v : r.linf) out << ',' << put(v);
    out << "\n";
  }
}

std::vector<FunctionalSnapshot> read_diagnostics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("t,Q,E,K,L,P,V,Vp", 0) != 0)
    throw std::runtime_error("not a diagnostics file: " + path.string());
  std::vector<FunctionalSnapshot> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::stod(cell));
    if (v.size() < 8) throw std::runtime_error("short diagnostics row");
    FunctionalSnapshot r{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], {v.begin() + 8, v.end()}};
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace qnls
