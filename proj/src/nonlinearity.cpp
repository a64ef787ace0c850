#include "qnls/nonlinearity.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

namespace qnls {

int Monomial::degree() const {
  int d = 0;
  for (int p : hol) d += p;
  for (int q : antihol) d += q;
  return d;
}

Polynomial::Polynomial(int components, std::vector<Monomial> terms) : components_(components) {
  if (components < 1) throw std::invalid_argument("polynomial needs at least one component");
  std::map<std::pair<std::vector<int>, std::vector<int>>, cplx> merged;
  for (auto& t : terms) {
    if (static_cast<int>(t.hol.size()) != components || static_cast<int>(t.antihol.size()) != components)
      throw std::invalid_argument("monomial exponent vectors must have one entry per component");
    for (int j = 0; j < components; ++j)
      if (t.hol[j] < 0 || t.antihol[j] < 0) throw std::invalid_argument("negative exponent in monomial");
    merged[{t.hol, t.antihol}] += t.coeff;
  }
  for (auto& [key, c] : merged)
    if (c != cplx{}) terms_.push_back({c, key.first, key.second});
  compile();
}

void Polynomial::compile() {
  compiled_.clear();
  for (const auto& t : terms_) {
    Compiled c{t.coeff, {}};
    for (int j = 0; j < components_; ++j) {
      for (int p = 0; p < t.hol[j]; ++p) c.factors.push_back({j, false});
      for (int q = 0; q < t.antihol[j]; ++q) c.factors.push_back({j, true});
    }
    compiled_.push_back(std::move(c));
  }
}

int Polynomial::degree() const {
  int d = -1;
  for (const auto& t : terms_) d = std::max(d, t.degree());
  return d;
}

bool Polynomial::homogeneous() const {
  for (const auto& t : terms_)
    if (t.degree() != degree()) return false;
  return true;
}

cplx Polynomial::operator()(std::span<const cplx> z) const {
  if (static_cast<int>(z.size()) != components_ && !terms_.empty())
    throw std::invalid_argument("argument length does not match the component count");
  cplx sum{};
  for (const auto& c : compiled_) {
    cplx v = c.coeff;
    for (const auto& f : c.factors) v *= f.conjugated ? std::conj(z[f.index]) : z[f.index];
    sum += v;
  }
  return sum;
}

Polynomial Polynomial::d_dz(int j) const {
  std::vector<Monomial> out;
  for (const auto& t : terms_) {
    if (t.hol[j] == 0) continue;
    Monomial m = t;
    m.coeff *= static_cast<double>(t.hol[j]);
    m.hol[j] -= 1;
    out.push_back(std::move(m));
  }
  return Polynomial(components_, std::move(out));
}

Polynomial Polynomial::d_dzbar(int j) const {
  std::vector<Monomial> out;
  for (const auto& t : terms_) {
    if (t.antihol[j] == 0) continue;
    Monomial m = t;
    m.coeff *= static_cast<double>(t.antihol[j]);
    m.antihol[j] -= 1;
    out.push_back(std::move(m));
  }
  return Polynomial(components_, std::move(out));
}

Polynomial Polynomial::conjugate() const {
  std::vector<Monomial> out;
  for (const auto& t : terms_) out.push_back({std::conj(t.coeff), t.antihol, t.hol});
  return Polynomial(components_, std::move(out));
}

Polynomial Polynomial::operator+(const Polynomial& other) const {
  if (components_ != other.components_ && !empty() && !other.empty())
    throw std::invalid_argument("adding polynomials with different component counts");
  std::vector<Monomial> all = terms_;
  all.insert(all.end(), other.terms_.begin(), other.terms_.end());
  return Polynomial(std::max(components_, other.components_), std::move(all));
}

double Polynomial::real_cross_partial(std::span<const double> y, int i, int j) const {
  double sum = 0;
  for (const auto& t : terms_) {
    std::vector<int> m(components_);
    for (int a = 0; a < components_; ++a) m[a] = t.hol[a] + t.antihol[a];
    double c = 1;
    c *= m[i];
    if (--m[i] < 0) continue;
    c *= m[j];
    if (--m[j] < 0) continue;
    double v = c;
    for (int a = 0; a < components_; ++a) v *= std::pow(y[a], m[a]);
    sum += t.coeff.real() * v;
  }
  return sum;
}

TrilinearPotential::TrilinearPotential(int components, std::vector<Monomial> terms)
    : poly_(components, std::move(terms)) {
  for (const auto& t : poly_.terms())
    if (t.degree() != 3) throw std::invalid_argument("potential terms must have total degree 3");
}

std::vector<Polynomial> derive_fk(const TrilinearPotential& F) {
  std::vector<Polynomial> fk;
  const auto& P = F.polynomial();
  for (int k = 0; k < F.components(); ++k) fk.push_back(P.d_dzbar(k) + P.d_dz(k).conjugate());
  return fk;
}

void CoefficientSet::validate() const {
  const auto l = alpha.size();
  if (l == 0) throw std::invalid_argument("coefficient set is empty");
  if (gamma.size() != l || beta.size() != l)
    throw std::invalid_argument("alpha, gamma and beta must have the same length");
  for (std::size_t k = 0; k < l; ++k) {
    if (!(alpha[k] > 0)) throw std::invalid_argument("alpha_k must be positive");
    if (!(gamma[k] > 0)) throw std::invalid_argument("gamma_k must be positive");
    if (!(beta[k] >= 0)) throw std::invalid_argument("beta_k must be non-negative");
  }
}

bool HypothesisReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const HypothesisCheck& HypothesisReport::at(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return c;
  throw std::out_of_range("no hypothesis check named " + id);
}

ModelSpec::ModelSpec(std::string name, CoefficientSet coeffs, TrilinearPotential potential) {
  coeffs.validate();
  if (potential.components() != coeffs.components() && !potential.terms().empty())
    throw std::invalid_argument("potential and coefficients disagree on the number of components");
  auto d = std::make_shared<Data>();
  d->name = std::move(name);
  d->coeffs = std::move(coeffs);
  d->potential = std::move(potential);
  d->fk = derive_fk(d->potential);
  d->fk.resize(d->coeffs.components());
  data_ = d;
  d->validation = validate_hypotheses(*this);
}

void ModelSpec::eval_fk(std::span<const cplx> z, std::span<cplx> out) const {
  const auto& fk = data_->fk;
  if (out.size() != fk.size()) throw std::invalid_argument("output length does not match the component count");
  for (std::size_t k = 0; k < fk.size(); ++k) out[k] = fk[k](z);
}

ModelSpec ModelSpec::with_beta(std::vector<double> beta) const {
  CoefficientSet c = coeffs();
  c.beta = std::move(beta);
  return ModelSpec(name(), std::move(c), potential());
}

namespace {

class Sampler {
 public:
  Sampler(int l, std::uint64_t seed) : l_(l), rng_(seed) {}

  std::vector<cplx> polydisc() {
    std::vector<cplx> z(l_);
    for (auto& v : z) v = std::polar(std::sqrt(unit_(rng_)), 2 * std::numbers::pi * unit_(rng_));
    return z;
  }
  std::vector<double> cone() {
    std::vector<double> y(l_);
    for (auto& v : y) v = unit_(rng_);
    return y;
  }
  double angle() { return 2 * std::numbers::pi * unit_(rng_); }
  double unit() { return unit_(rng_); }

 private:
  int l_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

std::vector<cplx> to_complex(const std::vector<double>& y) { return {y.begin(), y.end()}; }

}  // namespace

GaugeDeviation check_gauge(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  GaugeDeviation dev;
  std::vector<cplx> f(l), fr(l);
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    const double th = s.angle();
    std::vector<cplx> zr(l);
    for (int k = 0; k < l; ++k) zr[k] = std::polar(1.0, m.coeffs().sigma(k) * th) * z[k];
    m.eval_fk(z, f);
    m.eval_fk(zr, fr);
    for (int k = 0; k < l; ++k)
      dev.fk = std::max(dev.fk, std::abs(fr[k] - std::polar(1.0, m.coeffs().sigma(k) * th) * f[k]));
    dev.re_F = std::max(dev.re_F, std::abs(m.F(zr).real() - m.F(z).real()));
  }
  return dev;
}

bool check_gauge_symbolic(const ModelSpec& m) {
  const auto& c = m.coeffs();
  const int l = m.components();
  auto weight = [&](const Monomial& t) {
    double w = 0;
    for (int j = 0; j < l; ++j) w += c.sigma(j) * (t.hol[j] - t.antihol[j]);
    return w;
  };
  constexpr double tol = 1e-12;
  for (int k = 0; k < l; ++k)
    for (const auto& t : m.fk()[k].terms())
      if (std::abs(weight(t) - c.sigma(k)) > tol) return false;
  // Re F is phase invariant when every term of nonzero weight cancels against
  // the coefficient of its conjugate monomial.
  const auto& terms = m.potential().terms();
  for (const auto& t : terms) {
    if (std::abs(weight(t)) <= tol) continue;
    cplx partner{};
    for (const auto& u : terms)
      if (u.hol == t.antihol && u.antihol == t.hol) partner = u.coeff;
    if (std::abs(t.coeff + std::conj(partner)) > tol) return false;
  }
  return true;
}

double check_mass_balance(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  std::vector<cplx> f(l);
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    m.eval_fk(z, f);
    cplx sum{};
    for (int k = 0; k < l; ++k) sum += m.coeffs().sigma(k) * f[k] * std::conj(z[k]);
    dev = std::max(dev, std::abs(sum.imag()));
  }
  return dev;
}

double check_degree_identity(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  std::vector<cplx> f(l);
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    m.eval_fk(z, f);
    cplx sum{};
    for (int k = 0; k < l; ++k) sum += f[k] * std::conj(z[k]);
    dev = std::max(dev, std::abs(sum.real() - 3 * m.F(z).real()));
  }
  return dev;
}

double check_wirtinger(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  std::vector<cplx> f(l);
  constexpr double h = 1e-3;
  auto five_point = [&](std::vector<cplx> z, int k, cplx dir) {
    const cplx z0 = z[k];
    auto at = [&](double step) {
      z[k] = z0 + step * dir;
      return m.F(z);
    };
    return (-at(2 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2 * h)) / (12 * h);
  };
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    m.eval_fk(z, f);
    for (int k = 0; k < l; ++k) {
      const cplx dx = five_point(z, k, {1, 0});
      const cplx dy = five_point(z, k, {0, 1});
      const cplx dF_dzbar = 0.5 * (dx + cplx{0, 1} * dy);
      const cplx dF_dz = 0.5 * (dx - cplx{0, 1} * dy);
      dev = std::max(dev, std::abs(f[k] - (dF_dzbar + std::conj(dF_dz))));
    }
  }
  return dev;
}

double check_lipschitz(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  std::vector<Polynomial> derivs;
  double bound = 0;
  for (const auto& f : m.fk())
    for (int j = 0; j < l; ++j)
      for (auto d : {f.d_dz(j), f.d_dzbar(j)}) {
        double b = 0;
        for (const auto& t : d.terms()) b += std::abs(t.coeff);
        bound = std::max(bound, b);
        derivs.push_back(std::move(d));
      }
  Sampler s(l, seed);
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    auto w = s.polydisc();
    double dist = 0;
    for (int j = 0; j < l; ++j) dist += std::abs(z[j] - w[j]);
    if (dist == 0) continue;
    for (const auto& d : derivs) {
      if (d.degree() > 1) throw std::logic_error("derivative of f_k is not affine");
      dev = std::max(dev, std::abs(d(z) - d(w)) / dist - bound);
    }
  }
  return std::max(dev, 0.0);
}

double check_homogeneity(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    const double lam = 2 * s.unit();
    std::vector<cplx> zl(l);
    for (int k = 0; k < l; ++k) zl[k] = lam * z[k];
    dev = std::max(dev, std::abs(m.F(zl) - lam * lam * lam * m.F(z)));
  }
  return dev;
}

double check_modulus_domination(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  double dev = 0;
  for (int i = 0; i < samples; ++i) {
    auto z = s.polydisc();
    std::vector<cplx> a(l);
    for (int k = 0; k < l; ++k) a[k] = std::abs(z[k]);
    const cplx Fa = m.F(a);
    dev = std::max({dev, std::abs(Fa.imag()), std::abs(m.F(z).real()) - Fa.real()});
  }
  return std::max(dev, 0.0);
}

RealConeDeviation check_real_cone(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  Sampler s(l, seed);
  std::vector<cplx> f(l);
  RealConeDeviation dev;
  bool first = true;
  for (int i = 0; i < samples; ++i) {
    auto real = s.cone();
    for (auto& v : real) v = 2 * v - 1;
    dev.im_F = std::max(dev.im_F, std::abs(m.F(to_complex(real)).imag()));
    auto y = to_complex(s.cone());
    m.eval_fk(y, f);
    for (int k = 0; k < l; ++k) {
      dev.im_F = std::max(dev.im_F, std::abs(f[k].imag()));
      dev.min_fk = first ? f[k].real() : std::min(dev.min_fk, f[k].real());
      first = false;
    }
  }
  return dev;
}

double check_supermodularity(const ModelSpec& m, int samples, std::uint64_t seed) {
  const int l = m.components();
  if (l < 2) return 0;
  Sampler s(l, seed);
  const auto& P = m.potential().polynomial();
  double lowest = 0;
  bool first = true;
  for (int i = 0; i < samples; ++i) {
    auto y = s.cone();
    for (int a = 0; a < l; ++a)
      for (int b = a + 1; b < l; ++b) {
        const double v = P.real_cross_partial(y, a, b);
        lowest = first ? v : std::min(lowest, v);
        first = false;
      }
  }
  return lowest;
}

HypothesisReport validate_hypotheses(const ModelSpec& m, int samples, std::uint64_t seed, double threshold) {
  HypothesisReport r;
  r.samples = samples;
  r.seed = seed;
  r.threshold = threshold;
  auto add = [&](std::string id, std::string desc, double dev) {
    r.checks.push_back({std::move(id), std::move(desc), dev, dev <= threshold});
  };

  std::vector<cplx> zero(m.components()), f(m.components());
  m.eval_fk(zero, f);
  double at_zero = std::abs(m.F(zero));
  for (auto v : f) at_zero = std::max(at_zero, std::abs(v));
  add("H1", "f_k(0) = 0 and F(0) = 0", at_zero);
  add("H2", "derivatives of f_k Lipschitz within the coefficient bound", check_lipschitz(m, samples, seed));
  add("H3", "f_k agrees with the Wirtinger derivatives of F", check_wirtinger(m, samples, seed));
  const auto gauge = check_gauge(m, samples, seed);
  add("H4", "gauge invariance under z_k -> exp(i sigma_k theta) z_k",
      check_gauge_symbolic(m) ? gauge.max() : std::max(gauge.max(), 1.0));
  add("H5", "F is homogeneous of degree 3", check_homogeneity(m, samples, seed));
  add("H6", "|Re F(z)| <= F(|z|)", check_modulus_domination(m, samples, seed));
  const auto cone = check_real_cone(m, samples, seed);
  add("H7", "F and f_k real and f_k >= 0 on the positive cone", std::max(cone.im_F, std::max(0.0, -cone.min_fk)));
  add("H8", "mixed partials of F non-negative on the positive cone",
      std::max(0.0, -check_supermodularity(m, samples, seed)));
  add("mass_balance", "Im sum sigma_k f_k conj(z_k) = 0", check_mass_balance(m, samples, seed));
  add("degree_identity", "Re sum f_k conj(z_k) = 3 Re F", check_degree_identity(m, samples, seed));
  return r;
}

std::vector<std::string> builtin_model_names() { return {"shg3", "cascade3", "uv2"}; }

ModelSpec builtin_model(const std::string& name, const ModelParams& params) {
  auto beta = [&](int l) {
    auto b = params.beta.value_or(std::vector<double>(l, 0.0));
    if (static_cast<int>(b.size()) != l) throw std::invalid_argument("beta must have one entry per component");
    return b;
  };
  const double chi = params.chi;
  if (name == "shg3") {
    CoefficientSet c{{2, 1, 1}, {1, 1, 1}, beta(3)};
    TrilinearPotential F(3, {{0.5 * chi, {0, 2, 0}, {1, 0, 0}}, {0.5, {0, 0, 2}, {1, 0, 0}}});
    return ModelSpec(name, c, F);
  }
  if (name == "cascade3") {
    CoefficientSet c{{1, 2, 3}, {1, 1, 1}, beta(3)};
    TrilinearPotential F(3, {{0.5, {2, 0, 0}, {0, 1, 0}}, {chi, {1, 1, 0}, {0, 0, 1}}});
    return ModelSpec(name, c, F);
  }
  if (name == "uv2") {
    if (!(params.kappa > 0)) throw std::invalid_argument("kappa must be positive");
    CoefficientSet c{{1, 1}, {1, params.kappa}, beta(2)};
    TrilinearPotential F(2, {{chi, {0, 1}, {2, 0}}});
    return ModelSpec(name, c, F);
  }
  throw std::invalid_argument("unknown builtin model: " + name);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> v;
  for (const auto& item : split(s, ',')) v.push_back(std::stod(item));
  return v;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> v;
  for (const auto& item : split(s, ',')) v.push_back(std::stoi(item));
  return v;
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

ModelSpec parse_model_text(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int l = -1;
  std::string model_name = name;
  CoefficientSet c;
  std::vector<Monomial> terms;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("model line " + std::to_string(lineno) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    try {
      if (key == "name") model_name = value;
      else if (key == "l") l = std::stoi(value);
      else if (key == "alpha") c.alpha = parse_doubles(value);
      else if (key == "gamma") c.gamma = parse_doubles(value);
      else if (key == "beta") c.beta = parse_doubles(value);
      else if (key == "term") {
        Monomial m;
        for (const auto& part : split(value, ';')) {
          if (part.rfind("p=", 0) == 0) m.hol = parse_ints(part.substr(2));
          else if (part.rfind("q=", 0) == 0) m.antihol = parse_ints(part.substr(2));
          else {
            auto re_im = parse_doubles(part);
            if (re_im.size() != 2) throw std::invalid_argument("coefficient must be <re>,<im>");
            m.coeff = {re_im[0], re_im[1]};
          }
        }
        terms.push_back(std::move(m));
      } else
        throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("model line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (l < 1) throw std::invalid_argument("model file must set l >= 1");
  if (c.beta.empty()) c.beta.assign(l, 0.0);
  if (c.components() != l) throw std::invalid_argument("alpha must have l entries");
  return ModelSpec(model_name, c, TrilinearPotential(l, std::move(terms)));
}

ModelSpec read_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_model_text(ss.str(), path.stem().string());
}

std::string format_model_text(const ModelSpec& m) {
  std::ostringstream os;
  os.precision(17);
  os << "name=" << m.name() << "\n";
  os << "l=" << m.components() << "\n";
  os << "alpha=" << join(m.coeffs().alpha) << "\n";
  os << "gamma=" << join(m.coeffs().gamma) << "\n";
  os << "beta=" << join(m.coeffs().beta) << "\n";
  for (const auto& t : m.potential().terms())
    os << "term=" << t.coeff.real() << "," << t.coeff.imag() << ";p=" << join(t.hol) << ";q=" << join(t.antihol) << "\n";
  return os.str();
}

}  // namespace qnls
