#pragma once

#include <complex>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "qnls/nonlinearity.hpp"

namespace qnls {

enum class GridKind { Cartesian, Radial };

const char* to_string(GridKind k);
GridKind grid_kind_from_string(const std::string& s);

// Cartesian: periodic box [-L, L)^n with N points per axis, spectral operators.
// Radial: nodes r_i = i h, i < N, h = R/N, Dirichlet ghost node at r = R.
struct GridSpec {
  GridKind kind = GridKind::Cartesian;
  int dim = 1;
  int points = 0;
  double extent = 0;

  static GridSpec cartesian(int dim, int points, double half_width);
  static GridSpec radial(int dim, int points, double r_max);

  std::size_t size() const;
  double spacing() const;
  void validate() const;
  // Same node count on a box scaled by lambda; sampling a function there gives psi(x / lambda).
  GridSpec dilated(double lambda) const;

  bool operator==(const GridSpec&) const = default;
};

// Per-grid constants shared by all operators.
struct GridGeometry {
  std::vector<double> weight;     // quadrature weight per node
  std::vector<double> radius_sq;  // |x|^2 per node
  std::vector<double> xi_sq;      // Cartesian: |xi|^2 per Fourier mode
  std::vector<double> face;       // Radial: omega r^{n-1} at r_{i+1/2}, i < N
};

const GridGeometry& geometry(const GridSpec& g);
// Surface area of the unit sphere in R^n.
double sphere_area(int n);

class Field {
 public:
  Field() = default;
  explicit Field(const GridSpec& grid);
  Field(const GridSpec& grid, std::vector<cplx> values);

  const GridSpec& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }
  cplx operator[](std::size_t i) const { return values_[i]; }
  cplx& operator[](std::size_t i) { return values_[i]; }

 private:
  GridSpec grid_;
  std::vector<cplx> values_;
};

// Evaluate fn at every node. For radial grids the argument holds the single value r.
Field sample(const GridSpec& g, const std::function<cplx(std::span<const double>)>& fn);
// Coordinates of node i: n values (Cartesian) or {r} (Radial).
std::vector<double> node_coordinates(const GridSpec& g, std::size_t i);

Field laplacian(const Field& f);
double integrate(const GridSpec& g, std::span<const double> values);
double norm_sq(const Field& f);
double grad_sq_integral(const Field& f);
Field multiply_by_radius_sq(const Field& f);
// Radially non-increasing rearrangement of a non-negative field, preserving the L2 norm.
// Radial grids and Cartesian n = 1.
Field symmetric_decreasing_rearrangement(const Field& f);
// Cartesian only: f(x - shift) along the first axis, spectrally.
Field translate(const Field& f, double shift);

// Unnormalized FFTs on a Cartesian grid (in place).
void fft_forward(const GridSpec& g, std::span<cplx> data);
void fft_backward(const GridSpec& g, std::span<cplx> data);

struct FieldState {
  ModelSpec model;
  GridSpec grid;
  std::vector<Field> components;
  double t = 0;

  void validate() const;
  FieldState scaled(double a) const;
  // u(x / lambda): same node values on the dilated grid
  FieldState dilated(double lambda) const;
};

FieldState make_state(const ModelSpec& model, const GridSpec& grid,
                      const std::function<cplx(int k, std::span<const double> x)>& fn, double t = 0);

// Im integral of (x . grad u_k) conj(u_k)
double momentum_density_integral(const FieldState& s, int k);

// Header line "QNLS1 kind=... n=... N=... extent=... l=... t=..." followed by little-endian
// float64 (re, im) pairs, component by component.
void write_snapshot(const std::filesystem::path& path, const FieldState& s);
FieldState read_snapshot(const std::filesystem::path& path, const ModelSpec& model);
void write_snapshot(std::ostream& out, const FieldState& s);
FieldState read_snapshot(std::istream& in, const ModelSpec& model);

// Worker count for pointwise loops (QNLS_THREADS, default 1).
int thread_count();
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace qnls
