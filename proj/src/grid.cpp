#include "qnls/grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace qnls {

const char* to_string(GridKind k) { return k == GridKind::Cartesian ? "cartesian" : "radial"; }

GridKind grid_kind_from_string(const std::string& s) {
  if (s == "cartesian") return GridKind::Cartesian;
  if (s == "radial") return GridKind::Radial;
  throw std::invalid_argument("unknown grid kind: " + s);
}

GridSpec GridSpec::cartesian(int dim, int points, double half_width) {
  GridSpec g{GridKind::Cartesian, dim, points, half_width};
  g.validate();
  return g;
}

GridSpec GridSpec::radial(int dim, int points, double r_max) {
  GridSpec g{GridKind::Radial, dim, points, r_max};
  g.validate();
  return g;
}

std::size_t GridSpec::size() const {
  if (kind == GridKind::Radial) return points;
  std::size_t n = 1;
  for (int d = 0; d < dim; ++d) n *= points;
  return n;
}

double GridSpec::spacing() const {
  return kind == GridKind::Cartesian ? 2 * extent / points : extent / points;
}

void GridSpec::validate() const {
  if (!(extent > 0) || !std::isfinite(extent)) throw std::invalid_argument("grid extent must be positive");
  if (points < 8) throw std::invalid_argument("grid needs at least 8 points");
  if (kind == GridKind::Cartesian) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("Cartesian grids support n = 1, 2, 3");
    if (points % 2) throw std::invalid_argument("Cartesian grids need an even point count");
  } else if (dim < 1 || dim > 5) {
    throw std::invalid_argument("radial grids support n = 1..5");
  }
}

GridSpec GridSpec::dilated(double lambda) const {
  if (!(lambda > 0)) throw std::invalid_argument("dilation factor must be positive");
  GridSpec g = *this;
  g.extent *= lambda;
  return g;
}

double sphere_area(int n) { return 2 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n); }

namespace {

std::shared_ptr<const GridGeometry> build_geometry(const GridSpec& g) {
  auto geo = std::make_shared<GridGeometry>();
  const std::size_t M = g.size();
  const double h = g.spacing();
  const int N = g.points;
  if (g.kind == GridKind::Radial) {
    const int n = g.dim;
    const double om = sphere_area(n);
    geo->weight.resize(N);
    geo->radius_sq.resize(N);
    geo->face.resize(N);
    for (int i = 0; i < N; ++i) {
      const double r = i * h;
      geo->radius_sq[i] = r * r;
      // shell volume between r - h/2 and r + h/2; makes the Laplacian exact on r^2
      geo->weight[i] = om * (std::pow((i + 0.5) * h, n) - (i > 0 ? std::pow((i - 0.5) * h, n) : 0.0)) / n;
      geo->face[i] = om * std::pow((i + 0.5) * h, n - 1);
    }
    return geo;
  }
  geo->weight.assign(M, std::pow(h, g.dim));
  geo->radius_sq.assign(M, 0.0);
  geo->xi_sq.assign(M, 0.0);
  const double L = g.extent;
  for (std::size_t i = 0; i < M; ++i) {
    std::size_t rest = i;
    for (int d = g.dim - 1; d >= 0; --d) {
      const int j = static_cast<int>(rest % N);
      rest /= N;
      const double x = -L + j * h;
      const int m = j < N / 2 ? j : j - N;
      const double xi = std::numbers::pi * m / L;
      geo->radius_sq[i] += x * x;
      geo->xi_sq[i] += xi * xi;
    }
  }
  return geo;
}

struct GridKey {
  int kind, dim, points;
  double extent;
  auto operator<=>(const GridKey&) const = default;
};

class FftPlans {
 public:
  FftPlans(int dim, int points) {
    std::vector<int> n(dim, points);
    std::size_t M = 1;
    for (int d = 0; d < dim; ++d) M *= points;
    std::vector<cplx> buf(M);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft(dim, n.data(), p, p, FFTW_FORWARD, flags);
    bwd_ = fftw_plan_dft(dim, n.data(), p, p, FFTW_BACKWARD, flags);
    if (!fwd_ || !bwd_) throw std::runtime_error("FFTW planning failed");
  }
  ~FftPlans() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  FftPlans(const FftPlans&) = delete;
  FftPlans& operator=(const FftPlans&) = delete;

  void run(bool forward, std::span<cplx> data) const {
    auto* p = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(forward ? fwd_ : bwd_, p, p);
  }

 private:
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

std::mutex cache_mutex;

const FftPlans& plans_for(const GridSpec& g) {
  static std::map<std::pair<int, int>, std::unique_ptr<FftPlans>> cache;
  std::lock_guard lock(cache_mutex);
  auto& slot = cache[{g.dim, g.points}];
  if (!slot) slot = std::make_unique<FftPlans>(g.dim, g.points);
  return *slot;
}

void require_cartesian(const GridSpec& g, const char* what) {
  if (g.kind != GridKind::Cartesian) throw std::invalid_argument(std::string(what) + " requires a Cartesian grid");
}

}  // namespace

const GridGeometry& geometry(const GridSpec& g) {
  static std::map<GridKey, std::shared_ptr<const GridGeometry>> cache;
  g.validate();
  std::lock_guard lock(cache_mutex);
  auto& slot = cache[{static_cast<int>(g.kind), g.dim, g.points, g.extent}];
  if (!slot) slot = build_geometry(g);
  return *slot;
}

void fft_forward(const GridSpec& g, std::span<cplx> data) {
  require_cartesian(g, "FFT");
  plans_for(g).run(true, data);
}

void fft_backward(const GridSpec& g, std::span<cplx> data) {
  require_cartesian(g, "FFT");
  plans_for(g).run(false, data);
}

Field::Field(const GridSpec& grid) : grid_(grid), values_(grid.size()) { grid.validate(); }

Field::Field(const GridSpec& grid, std::vector<cplx> values) : grid_(grid), values_(std::move(values)) {
  grid.validate();
  if (values_.size() != grid.size()) throw std::invalid_argument("field size does not match its grid");
}

std::vector<double> node_coordinates(const GridSpec& g, std::size_t i) {
  const double h = g.spacing();
  if (g.kind == GridKind::Radial) return {static_cast<double>(i) * h};
  std::vector<double> x(g.dim);
  for (int d = g.dim - 1; d >= 0; --d) {
    x[d] = -g.extent + static_cast<double>(i % g.points) * h;
    i /= g.points;
  }
  return x;
}

Field sample(const GridSpec& g, const std::function<cplx(std::span<const double>)>& fn) {
  Field f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = fn(node_coordinates(g, i));
  return f;
}

Field laplacian(const Field& f) {
  const auto& g = f.grid();
  const auto& geo = geometry(g);
  Field out(g);
  auto v = f.values();
  auto o = out.values();
  if (g.kind == GridKind::Cartesian) {
    std::copy(v.begin(), v.end(), o.begin());
    fft_forward(g, o);
    const double inv = 1.0 / static_cast<double>(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= -geo.xi_sq[i] * inv;
    fft_backward(g, o);
    return out;
  }
  const int N = g.points;
  const double h = g.spacing();
  for (int i = 0; i < N; ++i) {
    const cplx right = (i + 1 < N ? v[i + 1] : cplx{}) - v[i];
    const cplx left = i > 0 ? v[i] - v[i - 1] : cplx{};
    const double fl = i > 0 ? geo.face[i - 1] : 0.0;
    o[i] = (geo.face[i] * right - fl * left) / (h * geo.weight[i]);
  }
  return out;
}

double integrate(const GridSpec& g, std::span<const double> values) {
  const auto& w = geometry(g).weight;
  if (values.size() != w.size()) throw std::invalid_argument("integrand size does not match grid");
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * values[i];
  return s;
}

double norm_sq(const Field& f) {
  const auto& w = geometry(f.grid()).weight;
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::norm(f[i]);
  return s;
}

double grad_sq_integral(const Field& f) {
  const auto& g = f.grid();
  const auto& geo = geometry(g);
  if (g.kind == GridKind::Cartesian) {
    std::vector<cplx> buf(f.values().begin(), f.values().end());
    fft_forward(g, buf);
    double s = 0;
    for (std::size_t i = 0; i < buf.size(); ++i) s += geo.xi_sq[i] * std::norm(buf[i]);
    return s * geo.weight[0] / static_cast<double>(buf.size());
  }
  const int N = g.points;
  const double h = g.spacing();
  double s = 0;
  for (int i = 0; i < N; ++i) {
    const cplx next = i + 1 < N ? f[i + 1] : cplx{};
    s += geo.face[i] * std::norm(next - f[i]);
  }
  return s / h;
}

Field multiply_by_radius_sq(const Field& f) {
  const auto& r2 = geometry(f.grid()).radius_sq;
  Field out = f;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= r2[i];
  return out;
}

Field symmetric_decreasing_rearrangement(const Field& f) {
  const auto& g = f.grid();
  if (g.kind == GridKind::Cartesian && g.dim != 1)
    throw std::invalid_argument("rearrangement supports radial grids and Cartesian n = 1");
  for (auto v : f.values())
    if (v.real() < 0 || std::abs(v.imag()) > 1e-14 * (1 + std::abs(v.real())))
      throw std::invalid_argument("rearrangement needs real non-negative values");
  const auto& geo = geometry(g);
  const std::size_t M = f.size();
  const double tie = 1e-9 * g.spacing() * g.spacing();

  std::vector<std::size_t> src(M), dst(M);
  for (std::size_t i = 0; i < M; ++i) src[i] = dst[i] = i;
  std::stable_sort(src.begin(), src.end(), [&](auto a, auto b) { return std::abs(f[a]) > std::abs(f[b]); });
  std::stable_sort(dst.begin(), dst.end(), [&](auto a, auto b) { return geo.radius_sq[a] < geo.radius_sq[b]; });

  Field out(g);
  std::size_t s = 0;
  double left = M ? geo.weight[src[0]] : 0.0;  // unused measure of source node src[s]
  for (std::size_t a = 0; a < M;) {
    std::size_t b = a;
    double measure = 0;
    while (b < M && geo.radius_sq[dst[b]] - geo.radius_sq[dst[a]] <= tie) measure += geo.weight[dst[b++]];
    double value;
    if (measure <= 0) {
      value = s < M ? std::abs(f[src[s]]) : 0.0;
    } else {
      // mean of |f|^2 over the next `measure` units of the sorted distribution
      double need = measure, acc = 0;
      while (need > 0 && s < M) {
        const double take = std::min(need, left);
        acc += take * std::norm(f[src[s]]);
        need -= take;
        left -= take;
        if (left <= 1e-14 * measure) {
          if (++s < M) left = geo.weight[src[s]];
        }
      }
      value = std::sqrt(acc / measure);
    }
    for (std::size_t c = a; c < b; ++c) out[dst[c]] = value;
    a = b;
  }
  return out;
}

Field translate(const Field& f, double shift) {
  const auto& g = f.grid();
  require_cartesian(g, "translate");
  if (g.dim != 1) throw std::invalid_argument("translate supports n = 1");
  Field out = f;
  auto o = out.values();
  fft_forward(g, o);
  const int N = g.points;
  for (int j = 0; j < N; ++j) {
    const int m = j < N / 2 ? j : j - N;
    const double xi = std::numbers::pi * m / g.extent;
    o[j] *= (j == N / 2 ? cplx(std::cos(xi * shift)) : std::polar(1.0, -xi * shift)) / static_cast<double>(N);
  }
  fft_backward(g, o);
  return out;
}

void FieldState::validate() const {
  grid.validate();
  if (static_cast<int>(components.size()) != model.components())
    throw std::invalid_argument("state must hold one field per model component");
  for (const auto& c : components)
    if (!(c.grid() == grid)) throw std::invalid_argument("component grid differs from state grid");
}

FieldState FieldState::scaled(double a) const {
  FieldState s = *this;
  for (auto& c : s.components)
    for (auto& v : c.values()) v *= a;
  return s;
}

FieldState FieldState::dilated(double lambda) const {
  FieldState s = *this;
  s.grid = grid.dilated(lambda);
  for (auto& c : s.components) c = Field(s.grid, {c.values().begin(), c.values().end()});
  return s;
}

FieldState make_state(const ModelSpec& model, const GridSpec& grid,
                      const std::function<cplx(int, std::span<const double>)>& fn, double t) {
  FieldState s{model, grid, {}, t};
  for (int k = 0; k < model.components(); ++k)
    s.components.push_back(sample(grid, [&](std::span<const double> x) { return fn(k, x); }));
  return s;
}

double momentum_density_integral(const FieldState& s, int k) {
  const auto& g = s.grid;
  const auto& f = s.components.at(k);
  const auto& geo = geometry(g);
  const std::size_t M = f.size();
  std::vector<cplx> xgrad(M);
  if (g.kind == GridKind::Cartesian) {
    const int N = g.points;
    std::vector<cplx> spec(f.values().begin(), f.values().end());
    fft_forward(g, spec);
    std::vector<cplx> buf(M);
    std::size_t stride = 1;
    for (int d = g.dim - 1; d >= 0; --d) {
      for (std::size_t i = 0; i < M; ++i) {
        const int j = static_cast<int>((i / stride) % N);
        const int m = j < N / 2 ? j : j - N;
        const double xi = j == N / 2 ? 0.0 : std::numbers::pi * m / g.extent;
        buf[i] = cplx(0, xi) * spec[i] / static_cast<double>(M);
      }
      fft_backward(g, buf);
      for (std::size_t i = 0; i < M; ++i) {
        const int j = static_cast<int>((i / stride) % N);
        xgrad[i] += (-g.extent + j * g.spacing()) * buf[i];
      }
      stride *= N;
    }
  } else {
    const int N = g.points;
    const double h = g.spacing();
    for (int i = 1; i < N; ++i) {
      const cplx next = i + 1 < N ? f[i + 1] : cplx{};
      xgrad[i] = (i * h) * (next - f[i - 1]) / (2 * h);
    }
  }
  double sum = 0;
  for (std::size_t i = 0; i < M; ++i) sum += geo.weight[i] * (xgrad[i] * std::conj(f[i])).imag();
  return sum;
}

void write_snapshot(std::ostream& out, const FieldState& s) {
  static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");
  s.validate();
  std::ostringstream head;
  head.precision(17);
  head << "QNLS1 kind=" << to_string(s.grid.kind) << " n=" << s.grid.dim << " N=" << s.grid.points
       << " extent=" << s.grid.extent << " l=" << s.components.size() << " t=" << s.t << "\n";
  out << head.str();
  for (const auto& c : s.components)
    out.write(reinterpret_cast<const char*>(c.values().data()), static_cast<std::streamsize>(c.size() * sizeof(cplx)));
  if (!out) throw std::runtime_error("snapshot write failed");
}

FieldState read_snapshot(std::istream& in, const ModelSpec& model) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty snapshot");
  std::istringstream head(line);
  std::string magic;
  head >> magic;
  if (magic != "QNLS1") throw std::runtime_error("not a QNLS1 snapshot");
  std::map<std::string, std::string> kv;
  std::string item;
  while (head >> item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw std::runtime_error("malformed snapshot header");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const char* key : {"kind", "n", "N", "extent", "l", "t"})
    if (!kv.count(key)) throw std::runtime_error(std::string("snapshot header lacks ") + key);
  GridSpec g{grid_kind_from_string(kv["kind"]), std::stoi(kv["n"]), std::stoi(kv["N"]), std::stod(kv["extent"])};
  g.validate();
  const int l = std::stoi(kv["l"]);
  if (l != model.components()) throw std::runtime_error("snapshot component count does not match the model");
  FieldState s{model, g, {}, std::stod(kv["t"])};
  for (int k = 0; k < l; ++k) {
    std::vector<cplx> v(g.size());
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(cplx)));
    if (!in) throw std::runtime_error("snapshot truncated");
    s.components.emplace_back(g, std::move(v));
  }
  return s;
}

void write_snapshot(const std::filesystem::path& path, const FieldState& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_snapshot(out, s);
}

FieldState read_snapshot(const std::filesystem::path& path, const ModelSpec& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_snapshot(in, model);
}

int thread_count() {
  static const int n = [] {
    const char* env = std::getenv("QNLS_THREADS");
    if (!env) return 1;
    const int v = std::atoi(env);
    return v >= 1 ? v : 1;
  }();
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n / 4096 + 1);
  if (workers <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk, e = std::min(n, b + chunk);
    if (b < e) pool.emplace_back(body, b, e);
  }
  for (auto& t : pool) t.join();
}

}  // namespace qnls
