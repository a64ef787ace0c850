#include "qnls/evolve.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace qnls {

void EvolveConfig::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(t_end >= dt)) throw std::invalid_argument("t_end must be at least dt");
  if (sample_every < 1) throw std::invalid_argument("sample_every must be >= 1");
  if (adaptive && !(dt_min > 0 && dt_min < dt)) throw std::invalid_argument("need 0 < dt_min < dt");
}

const char* to_string(EvolutionStatus s) {
  switch (s) {
    case EvolutionStatus::Completed: return "Completed";
    case EvolutionStatus::BlownUp: return "BlownUp";
    default: return "Aborted";
  }
}

namespace {

const cplx I1{0, 1};

class Stepper {
 public:
  explicit Stepper(const FieldState& s) : model_(s.model), grid_(s.grid) {}

  void step(FieldState& s, double dt) {
    nonlinear(s, 0.5 * dt);
    linear(s, dt);
    nonlinear(s, 0.5 * dt);
  }

  void nonlinear(FieldState& s, double h) {
    if (model_.potential().terms().empty()) return;
    const int l = model_.components();
    const auto& c = model_.coeffs();
    std::vector<cplx> scale(l);
    for (int k = 0; k < l; ++k) scale[k] = I1 / c.alpha[k];
    parallel_for(grid_.size(), [&](std::size_t b, std::size_t e) {
      std::vector<cplx> z(l), y(l), k1(l), k2(l), k3(l), k4(l);
      auto rhs = [&](const std::vector<cplx>& at, std::vector<cplx>& out) {
        model_.eval_fk(at, out);
        for (int k = 0; k < l; ++k) out[k] *= scale[k];
      };
      for (std::size_t i = b; i < e; ++i) {
        for (int k = 0; k < l; ++k) z[k] = s.components[k][i];
        rhs(z, k1);
        for (int k = 0; k < l; ++k) y[k] = z[k] + 0.5 * h * k1[k];
        rhs(y, k2);
        for (int k = 0; k < l; ++k) y[k] = z[k] + 0.5 * h * k2[k];
        rhs(y, k3);
        for (int k = 0; k < l; ++k) y[k] = z[k] + h * k3[k];
        rhs(y, k4);
        for (int k = 0; k < l; ++k) s.components[k][i] = z[k] + h / 6 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
      }
    });
  }

  void linear(FieldState& s, double dt) {
    if (grid_.kind == GridKind::Cartesian)
      fourier(s, dt);
    else
      crank_nicolson(s, dt);
  }

 private:
  void fourier(FieldState& s, double dt) {
    auto& phase = phases_[dt];
    const auto& geo = geometry(grid_);
    const auto& c = model_.coeffs();
    const int l = model_.components();
    const std::size_t M = grid_.size();
    if (phase.empty()) {
      phase.resize(l);
      for (int k = 0; k < l; ++k) {
        phase[k].resize(M);
        for (std::size_t i = 0; i < M; ++i)
          phase[k][i] = std::polar(1.0 / M, dt / c.alpha[k] * (-c.gamma[k] * geo.xi_sq[i] - c.beta[k]));
      }
    }
    for (int k = 0; k < l; ++k) {
      auto v = s.components[k].values();
      fft_forward(grid_, v);
      for (std::size_t i = 0; i < M; ++i) v[i] *= phase[k][i];
      fft_backward(grid_, v);
    }
  }

  // Thomas factorization of (I - dt/2 A) per component, A = (i/alpha)(gamma L - beta).
  struct Tridiag {
    std::vector<cplx> lower, diag, upper;  // of A
    std::vector<cplx> cprime, denom;       // factorization of I - dt/2 A
  };

  void crank_nicolson(FieldState& s, double dt) {
    auto& systems = tridiag_[dt];
    const int l = model_.components();
    const int N = grid_.points;
    if (systems.empty()) {
      const auto& geo = geometry(grid_);
      const auto& c = model_.coeffs();
      const double h = grid_.spacing();
      systems.resize(l);
      for (int k = 0; k < l; ++k) {
        auto& T = systems[k];
        T.lower.assign(N, 0);
        T.diag.assign(N, 0);
        T.upper.assign(N, 0);
        const cplx a = I1 / c.alpha[k];
        for (int i = 0; i < N; ++i) {
          const double denom = h * geo.weight[i];
          const double fl = i > 0 ? geo.face[i - 1] : 0.0;
          const double fr = geo.face[i];
          T.lower[i] = a * c.gamma[k] * fl / denom;
          T.upper[i] = i + 1 < N ? a * c.gamma[k] * fr / denom : cplx{};
          T.diag[i] = a * (-c.gamma[k] * (fl + fr) / denom - c.beta[k]);
        }
        T.cprime.resize(N);
        T.denom.resize(N);
        for (int i = 0; i < N; ++i) {
          const cplx lo = -0.5 * dt * T.lower[i];
          const cplx di = 1.0 - 0.5 * dt * T.diag[i];
          const cplx up = -0.5 * dt * T.upper[i];
          T.denom[i] = i > 0 ? di - lo * T.cprime[i - 1] : di;
          T.cprime[i] = up / T.denom[i];
        }
      }
    }
    std::vector<cplx> rhs(N);
    for (int k = 0; k < l; ++k) {
      const auto& T = systems[k];
      auto v = s.components[k].values();
      for (int i = 0; i < N; ++i) {
        cplx Av = T.diag[i] * v[i];
        if (i > 0) Av += T.lower[i] * v[i - 1];
        if (i + 1 < N) Av += T.upper[i] * v[i + 1];
        rhs[i] = v[i] + 0.5 * dt * Av;
      }
      for (int i = 0; i < N; ++i) {
        const cplx lo = -0.5 * dt * T.lower[i];
        rhs[i] = (rhs[i] - (i > 0 ? lo * rhs[i - 1] : cplx{})) / T.denom[i];
      }
      for (int i = N - 2; i >= 0; --i) rhs[i] -= T.cprime[i] * rhs[i + 1];
      std::copy(rhs.begin(), rhs.end(), v.begin());
    }
  }

  ModelSpec model_;
  GridSpec grid_;
  std::map<double, std::vector<std::vector<cplx>>> phases_;
  std::map<double, std::vector<Tridiag>> tridiag_;
};

bool all_finite(const FieldState& s) {
  for (const auto& c : s.components)
    for (auto v : c.values())
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

double max_sup(const FieldState& s) {
  double m = 0;
  for (const auto& c : s.components) m = std::max(m, sup_norm(c));
  return m;
}

EvolutionOutcome drive(const FieldState& s0, const EvolveConfig& cfg) {
  cfg.validate();
  s0.validate();
  Stepper stepper(s0);
  EvolutionOutcome out(s0);
  FieldState& s = out.final;
  const double t_end = s0.t + cfg.t_end;
  double dt = cfg.dt;
  const auto first = snapshot(s);
  out.diagnostics.push_back(first);
  const double K0 = first.K;
  const double E_scale = std::abs(first.E) > 1e-12 * std::max(first.K, 1e-300) ? std::abs(first.E) : first.K;
  int samples = 0;

  auto record = [&](bool force) {
    if (!force && out.steps % cfg.sample_every != 0) return true;
    const auto snap = snapshot(s);
    out.diagnostics.push_back(snap);
    if (first.Q > 0) out.max_Q_drift = std::max(out.max_Q_drift, std::abs(snap.Q - first.Q) / first.Q);
    if (E_scale > 0) out.max_E_drift = std::max(out.max_E_drift, std::abs(snap.E - first.E) / E_scale);
    ++samples;
    if (cfg.snapshot_dir && cfg.snapshot_every > 0 && samples % cfg.snapshot_every == 0)
      write_snapshot(*cfg.snapshot_dir / ("snapshot_" + std::to_string(samples) + ".qnls"), s);
    if (K0 > 0 && snap.K > cfg.blowup_K_factor * K0) {
      out.status = EvolutionStatus::BlownUp;
      out.reason = "K exceeded blowup_K_factor * K(0)";
      return false;
    }
    return true;
  };

  while (t_end - s.t > 1e-12 * std::max(1.0, std::abs(t_end))) {
    const double h = std::min(dt, t_end - s.t);
    if (cfg.adaptive) {
      const double Qb = charge(s);
      FieldState trial = s;
      stepper.step(trial, h);
      const double Qa = charge(trial);
      if (Qb > 0 && !(std::abs(Qa - Qb) <= cfg.adaptive_Q_tol * Qb)) {
        dt *= 0.5;
        if (dt < cfg.dt_min) {
          out.status = EvolutionStatus::BlownUp;
          out.reason = "adaptive dt fell below dt_min";
          break;
        }
        continue;
      }
      s = std::move(trial);
    } else {
      stepper.step(s, h);
    }
    s.t += h;
    ++out.steps;
    if (!all_finite(s)) {
      out.status = EvolutionStatus::Aborted;
      out.reason = "non-finite values";
      break;
    }
    if (max_sup(s) > cfg.blowup_linf) {
      out.status = EvolutionStatus::BlownUp;
      out.reason = "sup norm exceeded blowup_linf";
      record(true);
      break;
    }
    const bool last = t_end - s.t <= 1e-12 * std::max(1.0, std::abs(t_end));
    if (!record(last)) break;
  }
  out.t_detect = s.t;
  return out;
}

}  // namespace

EvolutionOutcome split_step(const FieldState& s, const EvolveConfig& cfg) {
  if (s.grid.kind != GridKind::Cartesian) throw std::invalid_argument("split_step needs a Cartesian grid");
  return drive(s, cfg);
}

EvolutionOutcome radial_step(const FieldState& s, const EvolveConfig& cfg) {
  if (s.grid.kind != GridKind::Radial) throw std::invalid_argument("radial_step needs a radial grid");
  return drive(s, cfg);
}

EvolutionOutcome run_with_monitors(const FieldState& s, const EvolveConfig& cfg) {
  return s.grid.kind == GridKind::Cartesian ? split_step(s, cfg) : radial_step(s, cfg);
}

void nonlinear_substep(FieldState& s, double dt) { Stepper(s).nonlinear(s, dt); }

void linear_substep(FieldState& s, double dt) { Stepper(s).linear(s, dt); }

FieldState standing_wave(const FieldState& ground, double omega, double t) {
  FieldState s = ground;
  s.t = t;
  for (int k = 0; k < s.model.components(); ++k) {
    const cplx ph = std::polar(1.0, s.model.coeffs().sigma(k) * omega * t);
    for (auto& v : s.components[k].values()) v *= ph;
  }
  return s;
}

std::vector<Field> standing_wave_dt(const FieldState& ground, double omega, double t) {
  auto s = standing_wave(ground, omega, t);
  for (int k = 0; k < s.model.components(); ++k)
    for (auto& v : s.components[k].values()) v *= I1 * s.model.coeffs().sigma(k) * omega;
  return s.components;
}

namespace {

void require_pseudo_conformal(const FieldState& ground, double T, double t) {
  if (ground.grid.kind != GridKind::Radial || ground.grid.dim != 4)
    throw std::invalid_argument("pseudo-conformal family needs an n = 4 radial ground state");
  for (double b : ground.model.coeffs().beta)
    if (b != 0) throw std::invalid_argument("pseudo-conformal family needs beta = 0");
  if (!(T > 0)) throw std::invalid_argument("blow-up time T must be positive");
  if (!(t >= 0 && t < T)) throw std::invalid_argument("need 0 <= t < T");
}

}  // namespace

FieldState pseudo_conformal_solution(const FieldState& ground, double T, double t) {
  require_pseudo_conformal(ground, T, t);
  const double tau = T - t;
  FieldState s = ground.dilated(tau);
  s.t = t;
  const auto& r2 = geometry(s.grid).radius_sq;
  for (int k = 0; k < s.model.components(); ++k) {
    const double sig = s.model.coeffs().sigma(k);
    auto v = s.components[k].values();
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] *= std::polar(1 / (tau * tau), sig * (-r2[i] / (4 * tau) + t / (T * tau)));
  }
  return s;
}

std::vector<Field> pseudo_conformal_dt(const FieldState& ground, double T, double t) {
  require_pseudo_conformal(ground, T, t);
  const double tau = T - t;
  const auto v = pseudo_conformal_solution(ground, T, t);
  const auto& r2 = geometry(v.grid).radius_sq;
  const int N = ground.grid.points;
  const double hs = ground.grid.spacing();
  std::vector<Field> out;
  for (int k = 0; k < v.model.components(); ++k) {
    const double sig = v.model.coeffs().sigma(k);
    const auto& psi = ground.components[k];
    Field d(v.grid);
    for (int i = 0; i < N; ++i) {
      const cplx next = i + 1 < N ? psi[i + 1] : cplx{};
      const cplx dpsi = i > 0 ? (next - psi[i - 1]) / (2 * hs) : cplx{};
      const double s_i = i * hs;
      const double phase = sig * (-r2[i] / (4 * tau) + t / (T * tau));
      const cplx dphase = sig * (-r2[i] / (4 * tau * tau) + 1 / (tau * tau));
      d[i] = v.components[k][i] * (2 / tau + I1 * dphase) + std::polar(1 / (tau * tau), phase) * dpsi * (s_i / tau);
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<double> pde_residual(const FieldState& s, const std::vector<Field>& dudt, double inner_fraction) {
  s.validate();
  const int l = s.model.components();
  if (static_cast<int>(dudt.size()) != l) throw std::invalid_argument("need one time derivative per component");
  const auto& c = s.model.coeffs();
  const std::size_t M = s.grid.size();
  std::vector<Field> lap;
  for (const auto& f : s.components) lap.push_back(laplacian(f));
  std::vector<double> res(l, 0.0);
  std::vector<cplx> z(l), f(l);
  const double limit = inner_fraction * s.grid.extent;
  for (std::size_t i = 0; i < M; ++i) {
    bool inside = true;
    for (double x : node_coordinates(s.grid, i)) inside = inside && std::abs(x) <= limit;
    if (!inside) continue;
    for (int k = 0; k < l; ++k) z[k] = s.components[k][i];
    s.model.eval_fk(z, f);
    for (int k = 0; k < l; ++k) {
      const cplx r = I1 * c.alpha[k] * dudt[k][i] + c.gamma[k] * lap[k][i] - c.beta[k] * z[k] + f[k];
      res[k] = std::max(res[k], std::abs(r));
    }
  }
  return res;
}

double virial_check(const DiagnosticsSeries& series, double E0, int n) {
  if (series.size() < 3) throw std::invalid_argument("virial check needs at least 3 samples");
  double scale = 0, worst = 0;
  for (std::size_t i = 1; i + 1 < series.size(); ++i) {
    const auto& a = series[i - 1];
    const auto& b = series[i];
    const auto& c = series[i + 1];
    const double h1 = b.t - a.t, h2 = c.t - b.t;
    const double fd = 2 * ((c.V - b.V) / h2 - (b.V - a.V) / h1) / (h1 + h2);
    const double rhs = 2.0 * n * E0 - 2.0 * n * b.L + 2.0 * (4 - n) * b.K;
    scale = std::max(scale, std::abs(rhs));
    worst = std::max(worst, std::abs(fd - rhs));
  }
  return scale > 0 ? worst / scale : worst;
}

}  // namespace qnls
