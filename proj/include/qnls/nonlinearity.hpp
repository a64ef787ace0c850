#pragma once

#include <algorithm>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qnls {

using cplx = std::complex<double>;

// coeff * prod_j z_j^hol[j] * conj(z_j)^antihol[j]
struct Monomial {
  cplx coeff;
  std::vector<int> hol;
  std::vector<int> antihol;

  int degree() const;
};

// Polynomial in (z, conj z). Like terms are merged and zero terms dropped.
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(int components, std::vector<Monomial> terms);

  int components() const { return components_; }
  const std::vector<Monomial>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }
  // -1 for the zero polynomial, otherwise the largest term degree.
  int degree() const;
  bool homogeneous() const;

  cplx operator()(std::span<const cplx> z) const;

  Polynomial d_dz(int j) const;
  Polynomial d_dzbar(int j) const;
  // The polynomial whose values are the complex conjugates of this one.
  Polynomial conjugate() const;
  Polynomial operator+(const Polynomial& other) const;

  // d^2/dy_i dy_j of Re P(y) for real arguments y.
  double real_cross_partial(std::span<const double> y, int i, int j) const;

 private:
  struct Factor {
    int index;
    bool conjugated;
  };
  struct Compiled {
    cplx coeff;
    std::vector<Factor> factors;
  };

  void compile();

  int components_ = 0;
  std::vector<Monomial> terms_;
  std::vector<Compiled> compiled_;
};

// F(z, conj z): every term has total degree 3.
class TrilinearPotential {
 public:
  TrilinearPotential() = default;
  TrilinearPotential(int components, std::vector<Monomial> terms);

  int components() const { return poly_.components(); }
  const std::vector<Monomial>& terms() const { return poly_.terms(); }
  const Polynomial& polynomial() const { return poly_; }
  cplx operator()(std::span<const cplx> z) const { return poly_(z); }

 private:
  Polynomial poly_;
};

// f_k = dF/d(conj z_k) + conj(dF/dz_k)
std::vector<Polynomial> derive_fk(const TrilinearPotential& F);

struct CoefficientSet {
  std::vector<double> alpha;
  std::vector<double> gamma;
  std::vector<double> beta;

  int components() const { return static_cast<int>(alpha.size()); }
  double sigma(int k) const { return alpha[k] / gamma[k]; }
  // weight of component k in the charge Q
  double charge_weight(int k) const { return alpha[k] * alpha[k] / gamma[k]; }
  double b(int k, double omega) const { return charge_weight(k) * omega + beta[k]; }
  void validate() const;
};

struct HypothesisCheck {
  std::string id;
  std::string description;
  double deviation = 0;
  bool pass = false;
};

struct HypothesisReport {
  std::vector<HypothesisCheck> checks;
  int samples = 0;
  std::uint64_t seed = 0;
  double threshold = 1e-10;

  bool all_pass() const;
  const HypothesisCheck& at(const std::string& id) const;
};

class ModelSpec {
 public:
  ModelSpec(std::string name, CoefficientSet coeffs, TrilinearPotential potential);

  const std::string& name() const { return data_->name; }
  int components() const { return data_->coeffs.components(); }
  const CoefficientSet& coeffs() const { return data_->coeffs; }
  const TrilinearPotential& potential() const { return data_->potential; }
  const std::vector<Polynomial>& fk() const { return data_->fk; }
  const HypothesisReport& validation() const { return data_->validation; }

  cplx F(std::span<const cplx> z) const { return data_->potential(z); }
  void eval_fk(std::span<const cplx> z, std::span<cplx> out) const;

  // Same nonlinearity and dispersion with a different linear potential.
  ModelSpec with_beta(std::vector<double> beta) const;

 private:
  struct Data {
    std::string name;
    CoefficientSet coeffs;
    TrilinearPotential potential;
    std::vector<Polynomial> fk;
    HypothesisReport validation;
  };
  std::shared_ptr<const Data> data_;
};

inline constexpr int kDefaultSamples = 1000;
inline constexpr double kHypothesisThreshold = 1e-10;

struct GaugeDeviation {
  double fk = 0;    // |f_k(e^{i sigma theta} z) - e^{i sigma_k theta} f_k(z)|
  double re_F = 0;  // |Re F(e^{i sigma theta} z) - Re F(z)|
  double max() const { return std::max(fk, re_F); }
};

struct RealConeDeviation {
  double im_F = 0;    // max |Im F(y)| over real y and |Im f_k(y)| on the cone
  double min_fk = 0;  // min f_k(y) over the positive cone
};

GaugeDeviation check_gauge(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
// Exact test on the monomial phase weights.
bool check_gauge_symbolic(const ModelSpec& m);
double check_mass_balance(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
double check_degree_identity(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
double check_wirtinger(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
double check_lipschitz(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
double check_homogeneity(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
double check_modulus_domination(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
RealConeDeviation check_real_cone(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);
// Minimum of the mixed second partials of F over the positive cone.
double check_supermodularity(const ModelSpec& m, int samples = kDefaultSamples, std::uint64_t seed = 0);

HypothesisReport validate_hypotheses(const ModelSpec& m, int samples = kDefaultSamples,
                                     std::uint64_t seed = 0, double threshold = kHypothesisThreshold);

struct ModelParams {
  std::optional<std::vector<double>> beta;
  double chi = 1.0;
  double kappa = 0.5;
};

std::vector<std::string> builtin_model_names();
ModelSpec builtin_model(const std::string& name, const ModelParams& params = {});

ModelSpec parse_model_text(const std::string& text, const std::string& name = "custom");
ModelSpec read_model_file(const std::filesystem::path& path);
std::string format_model_text(const ModelSpec& m);

}  // namespace qnls
