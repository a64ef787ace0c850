#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "qnls/functionals.hpp"

namespace qnls {

struct GroundStateOptions {
  double tol = 1e-10;           // on |S - 1|
  double residual_tol = 1e-9;   // sup norm of the elliptic residual
  int max_iterations = 20000;
  // psi <- (1 - r) psi + r S^2 L^{-1} f(psi); r = 1 is the plain iteration, which stalls in a
  // period-2 cycle for coupled systems
  double relaxation = 0.5;
  double init_width = 1;        // Gaussians a_k exp(-|x|^2 / width^2)
  std::vector<double> amplitude_scan{0.25, 0.5, 1, 2, 4};
  int max_restarts = 8;
};

struct GroundStateResult {
  FieldState profile;
  double omega = 1;
  double residual = 0;
  EllipticFunctionals functionals;
  std::array<double, 3> pohozaev_dev{};  // |P-2I|/I, |K-nI|/I, |Qw-(6-n)I|/I
  double S = 0;
  int iterations = 0;
};

// Sup norm over nodes of -gamma_k Lap psi_k + b_k psi_k - f_k(psi), per component.
std::vector<double> elliptic_residual(const FieldState& s, double omega);

// Gaussian initial guess from a scan of amplitudes, rearranged, then Petviashvili iteration.
GroundStateResult petviashvili_solve(const ModelSpec& model, double omega, const GridSpec& grid,
                                     const GroundStateOptions& opt = {});
// Iteration from a given non-negative real initial state.
GroundStateResult petviashvili_solve(const FieldState& init, double omega, const GroundStateOptions& opt = {});

std::array<double, 3> pohozaev_check(const FieldState& s, double omega);
std::array<double, 3> pohozaev_check(const GroundStateResult& r, int n);

// t delta_lambda psi with K = Qw = 1, where delta_lambda psi = psi(x / lambda).
FieldState normalize_KQ1(const FieldState& s, double omega);
// t0 delta_lambda0 psi0 with t0 = 2 xi1 / (6 - n), lambda0 = sqrt((6 - n) / n).
FieldState scale_to_solution(const FieldState& normalized, double xi1, int n);
double xi1_of(const GroundStateResult& r);

struct ConstrainedMinOptions {
  double dtau = 0.5;
  double tol = 1e-10;  // sup norm of the Euler-Lagrange residual
  int max_iterations = 200000;
  double init_width = 2;
};

struct ConstrainedMinResult {
  double nu = 0;
  FieldState minimizer;
  double I_nu = 0;
  double theta = 0;  // (K + L - 3P) / Q
  double lagrange_omega = 0;
  double residual = 0;
  int iterations = 0;
};

// Normalized gradient flow for inf { E(phi) : Q(phi) = nu }, 1 <= n <= 3.
ConstrainedMinResult constrained_minimize(const ModelSpec& model, double nu, const GridSpec& grid,
                                          const ConstrainedMinOptions& opt = {});

// psi^lambda = lambda^{n/2} psi(lambda x)
FieldState l2_dilation(const FieldState& s, double lambda);
// n = 5: (2K / (5P))^2
double lambda_star(const FieldState& s);

struct InstabilityDatum {
  FieldState state;
  std::optional<double> predicted_energy;  // n = 4: -2 (1+eps)^2 eps P(psi)
};
// n = 4: (1 + eps) psi. n = 5: psi^lambda with lambda > 1.
InstabilityDatum instability_initializer(const FieldState& ground, double eps_or_lambda);

struct InstabilityData5D {
  double lambda_star = 0;
  std::vector<std::pair<double, double>> T_at_lambda;
  double m = 0;  // I at psi^{lambda_star}
};
InstabilityData5D instability_data_5d(const FieldState& ground, const std::vector<double>& lambdas);

// Cartesian n = 1: peak of sum |u_k|^2 with quadratic sub-grid interpolation.
double peak_position(const FieldState& s);
// Translate so the peak sits at target, then apply the best common phase e^{i sigma_k theta} against ref.
FieldState align_to(const FieldState& s, const FieldState& ref);

struct ModulatedDistance {
  double l2 = 0;  // relative to ||ref||
  double h1 = 0;  // relative to ||ref||_{H^1}
  double linf = 0;
  double shift = 0;
  double theta = 0;
};
ModulatedDistance modulated_distance(const FieldState& s, const FieldState& ref);

void write_groundstate_archive(const std::filesystem::path& path, const GroundStateResult& r);
GroundStateResult read_groundstate_archive(const std::filesystem::path& path, const ModelSpec& model);

}  // namespace qnls
