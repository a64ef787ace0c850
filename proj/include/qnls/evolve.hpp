#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qnls/functionals.hpp"

namespace qnls {

struct EvolveConfig {
  double dt = 1e-3;
  double t_end = 1;
  int sample_every = 10;
  double blowup_K_factor = 1e6;
  double blowup_linf = 1e8;
  bool adaptive = false;
  double dt_min = 1e-9;
  double adaptive_Q_tol = 1e-8;  // relative single-step Q drift that triggers dt halving
  std::optional<std::filesystem::path> snapshot_dir;
  int snapshot_every = 0;  // in samples; 0 disables

  void validate() const;
};

enum class EvolutionStatus { Completed, BlownUp, Aborted };
const char* to_string(EvolutionStatus s);

using DiagnosticsSeries = std::vector<FunctionalSnapshot>;

struct EvolutionOutcome {
  explicit EvolutionOutcome(FieldState s) : final(std::move(s)) {}

  EvolutionStatus status = EvolutionStatus::Completed;
  double t_detect = 0;
  std::string reason;
  FieldState final;
  DiagnosticsSeries diagnostics;
  double max_Q_drift = 0;  // relative to the first sample
  double max_E_drift = 0;
  long steps = 0;
};

// Strang splitting: RK4 half steps of the pointwise nonlinear ODE around an exact Fourier step.
EvolutionOutcome split_step(const FieldState& s, const EvolveConfig& cfg);
// Same splitting with a Crank-Nicolson linear step on the radial grid.
EvolutionOutcome radial_step(const FieldState& s, const EvolveConfig& cfg);
// Dispatches on the grid kind.
EvolutionOutcome run_with_monitors(const FieldState& s, const EvolveConfig& cfg);

// Single substeps, exposed for testing.
void nonlinear_substep(FieldState& s, double dt);
void linear_substep(FieldState& s, double dt);

// u_k = exp(i sigma_k omega t) psi_k
FieldState standing_wave(const FieldState& ground, double omega, double t);
std::vector<Field> standing_wave_dt(const FieldState& ground, double omega, double t);

// Explicit n = 4 blow-up family built from a ground state of (omega, beta) = (1, 0).
// The result lives on the ground-state grid dilated by T - t.
FieldState pseudo_conformal_solution(const FieldState& ground, double T, double t);
std::vector<Field> pseudo_conformal_dt(const FieldState& ground, double T, double t);

// sup over nodes with |x| <= inner_fraction * extent of |i alpha du/dt + gamma Lap u - beta u + f(u)|
std::vector<double> pde_residual(const FieldState& s, const std::vector<Field>& dudt, double inner_fraction = 1.0);

// Max |second difference of V - virial_rhs| over interior samples, relative to max |virial_rhs|.
double virial_check(const DiagnosticsSeries& series, double E0, int n);

}  // namespace qnls
