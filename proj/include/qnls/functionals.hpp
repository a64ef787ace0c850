#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qnls/grid.hpp"

namespace qnls {

double charge(const FieldState& s);                      // Q = sum (alpha^2/gamma) ||u_k||^2
double charge_omega(const FieldState& s, double omega);  // sum b_k ||u_k||^2
double kinetic(const FieldState& s);                     // K = sum gamma ||grad u_k||^2
double linear_potential(const FieldState& s);            // L = sum beta ||u_k||^2
double interaction(const FieldState& s);                 // P = Re integral F(u)
double energy(const FieldState& s);                      // K + L - 2P
double action(const FieldState& s, double omega);        // (K + Qw)/2 - P
// Qw^{3/2-n/4} K^{n/4} / P; empty when P <= 0.
std::optional<double> weinstein_J(const FieldState& s, double omega);

// Optimal constant of P <= C Qw^{3/2-n/4} K^{n/4}, from the ground-state Qw.
double sharp_constant(double ground_charge_omega, int n);
// Throws unless every b_k = (alpha_k^2/gamma_k) omega + beta_k is positive.
void require_admissible(const ModelSpec& m, double omega);

struct EllipticFunctionals {
  double omega = 0;
  std::vector<double> b;
  double I = 0, K = 0, Qw = 0, P = 0, Q = 0;
  std::optional<double> J;
};
EllipticFunctionals elliptic_functionals(const FieldState& s, double omega);
// Minimum of J, from the ground-state Qw.
double xi1_from_charge(double ground_charge_omega, int n);

struct VarianceResult {
  double V = 0;
  double Vp = 0;
  double outer_fraction = 0;  // share of Q beyond 0.9 of the extent
  bool boundary_warning = false;
};
VarianceResult variance(const FieldState& s);

double virial_rhs(const FieldState& s, double E0);  // 2nE0 - 2nL + 2(4-n)K
double virial_rhs_direct(const FieldState& s);      // 8K - 4nP

// Radial cutoff: r^2 on [0,1], 0 for r >= 3, chi'' <= 2.
namespace cutoff {
double chi(double r);
// d^m chi / dr^m for m = 0..4
double derivative(double r, int m);
}  // namespace cutoff

// Second time derivative of integral chi_R sum (alpha^2/gamma)|u_k|^2, chi_R = R^2 chi(r/R).
double local_virial_rhs(const FieldState& s, double R);

double T_functional(const FieldState& s);  // K - (n/2) P

struct FunctionalSnapshot {
  double t = 0, Q = 0, E = 0, K = 0, L = 0, P = 0, V = 0, Vp = 0;
  std::vector<double> linf;
};
FunctionalSnapshot snapshot(const FieldState& s);
double sup_norm(const Field& f);

enum class Classification { Global, Blowup, Indeterminate };
const char* to_string(Classification c);

struct ThresholdReport {
  int n = 0;
  double Q = 0, E = 0, K = 0;
  double Q_ground = 0, E_ground = 0, K_ground = 0;
  double QE_ratio = 0;  // Q E / (Q_psi E_psi), n = 5
  double QK_ratio = 0;  // Q K / (Q_psi K_psi), n = 5
  double Q_ratio = 0;   // Q / Q_psi, n = 4
  Classification classification = Classification::Indeterminate;
};
ThresholdReport threshold_report(const FieldState& data, const FieldState& ground, double margin = 1e-9);

void write_diagnostics_csv(const std::filesystem::path& path, const std::vector<FunctionalSnapshot>& rows);
std::vector<FunctionalSnapshot> read_diagnostics_csv(const std::filesystem::path& path);

}  // namespace qnls
