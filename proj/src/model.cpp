#include "rotkde/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "rotkde/error.hpp"
#include "rotkde/quadrature.hpp"

namespace rotkde {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934382;

double gaussian_pdf(double y, double sigma) {
  const double z = y / sigma;
  return kInvSqrt2Pi / sigma * std::exp(-0.5 * z * z);
}

// (-1)^j sigma^-j He_j(y / sigma) phi_sigma(y)
double gaussian_derivative(int j, double y, double sigma) {
  const double z = y / sigma;
  double he_prev = 1, he = z;
  if (j == 0) he = 1;
  for (int k = 1; k < j; ++k) {
    const double next = z * he - k * he_prev;
    he_prev = he;
    he = next;
  }
  const double sign = (j % 2 == 0) ? 1.0 : -1.0;
  return sign * he * gaussian_pdf(y, sigma) / std::pow(sigma, j);
}

double unit_lambda(double t) { return 2 * bump(2 * t) - bump(t); }

double unit_lambda_derivative(int j, double t) {
  if (j == 0) return unit_lambda(t);
  if (std::abs(t) > 1.1) return 0;
  return finite_difference(unit_lambda, j, t);
}

std::vector<double> linspace(double a, double b, int count) {
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i)
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
  return out;
}

int holder_r(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  return static_cast<int>(std::ceil(beta)) - 1;
}

std::string describe(const char *what, int j, double y, double z = 0) {
  std::ostringstream os;
  os.precision(17);
  os << what << " (derivative " << j << ") at y=" << y;
  if (z != 0) os << ", z=" << z;
  return os.str();
}

// Integral of A(off_a + ca u) B(off_b + cb u) du over the real line,
// restricted to where both factors are non-negligible.
double product_integral(const Marginal &a, double off_a, double ca, const Marginal &b,
                        double off_b, double cb) {
  const double inf = std::numeric_limits<double>::infinity();
  double lo = -inf, hi = inf;
  std::vector<double> breaks;
  auto restrict = [&](const Marginal &g, double shift, double slope) {
    const double half = g.effective_support();
    if (std::abs(slope) < 1e-300) {
      if (std::abs(shift) > half) hi = lo - 1;
      return;
    }
    double u1 = (-half - shift) / slope, u2 = (half - shift) / slope;
    if (u1 > u2) std::swap(u1, u2);
    lo = std::max(lo, u1);
    hi = std::min(hi, u2);
    breaks.push_back(-shift / slope);
    for (double e : g.breakpoints()) breaks.push_back((e - shift) / slope);
  };
  restrict(a, off_a, ca);
  restrict(b, off_b, cb);
  if (!(hi > lo)) return 0;
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw NumericError("product_integral: unbounded integration range");
  auto f = [&](double u) { return a.density(off_a + ca * u) * b.density(off_b + cb * u); };
  return quad::integrate<double>(f, lo, hi, 1e-13, std::span<const double>(breaks))
      .value;
}

}  // namespace

double bump(double y) {
  if (std::abs(y) >= 1) return 0;
  return std::exp(-1.0 / (1.0 - y * y));
}

std::vector<double> central_difference_weights(int derivative) {
  if (derivative < 0) throw std::invalid_argument("derivative order must be >= 0");
  if (derivative == 0) return {1.0};
  const int p = (derivative + 1) / 2 - 1 + 3;
  const int count = 2 * p + 1;
  std::vector<double> x(count);
  for (int i = 0; i < count; ++i) x[i] = i - p;
  // Fornberg (1988): weights c[k][i] for derivative k at x0 = 0.
  const int m = derivative;
  std::vector<std::vector<double>> c(m + 1, std::vector<double>(count, 0.0));
  c[0][0] = 1;
  double c1 = 1, c4 = x[0];
  for (int i = 1; i < count; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1;
    const double c5 = c4;
    c4 = x[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
        c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
      }
      for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
      c[0][j] = c4 * c[0][j] / c3;
    }
    c1 = c2;
  }
  return c[m];
}

double finite_difference(const std::function<double(double)> &f, int derivative,
                         double y, double step) {
  if (derivative == 0) return f(y);
  static std::mutex mutex;
  static std::map<int, std::vector<double>> cache;
  std::vector<double> w;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(derivative);
    if (it == cache.end())
      it = cache.emplace(derivative, central_difference_weights(derivative)).first;
    w = it->second;
  }
  const int p = static_cast<int>(w.size()) / 2;
  double acc = 0;
  for (int i = 0; i < static_cast<int>(w.size()); ++i)
    if (w[i] != 0) acc += w[i] * f(y + (i - p) * step);
  return acc / std::pow(step, derivative);
}

Certification holder_check(const std::function<double(int, double)> &derivative,
                           std::span<const double> grid, double beta, double L,
                           double slack) {
  if (!(L > 0)) throw std::invalid_argument("L must be positive");
  const int r = holder_r(beta);
  const double alpha = beta - r;
  const std::size_t n = grid.size();
  Certification out;
  std::vector<double> top(n);
  for (int j = 0; j <= r; ++j) {
    double worst = 0, at = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = derivative(j, grid[i]);
      if (j == r) top[i] = v;
      if (std::abs(v) > worst) {
        worst = std::abs(v);
        at = grid[i];
      }
    }
    const double ratio = worst / L;
    if (ratio > out.worst_ratio) out.worst_ratio = ratio;
    if (ratio > slack && out.pass) {
      out.pass = false;
      out.violation = describe("sup-norm bound exceeded", j, at);
      out.y = at;
    }
  }
  double top_sup = 0;
  for (double v : top) top_sup = std::max(top_sup, std::abs(v));
  // Pairs farther apart than z_max satisfy the bound automatically.
  const double z_max = std::pow(2 * top_sup / L, 1.0 / alpha);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const double z = grid[k] - grid[i];
      if (z >= z_max) break;
      if (z <= 0) continue;
      const double ratio = std::abs(top[k] - top[i]) / (L * std::pow(z, alpha));
      if (ratio > out.worst_ratio) out.worst_ratio = ratio;
      if (ratio > slack && out.pass) {
        out.pass = false;
        out.violation = describe("Hölder increment bound exceeded", r, grid[i], z);
        out.y = grid[i];
        out.z = z;
      }
    }
  return out;
}

double holder_norm(const std::function<double(int, double)> &derivative,
                   std::span<const double> grid, double beta) {
  const int r = holder_r(beta);
  const double alpha = beta - r;
  const std::size_t n = grid.size();
  double best = 0;
  std::vector<double> top(n);
  for (int j = 0; j <= r; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double v = derivative(j, grid[i]);
      if (j == r) top[i] = v;
      best = std::max(best, std::abs(v));
    }
  double top_sup = 0;
  for (double v : top) top_sup = std::max(top_sup, std::abs(v));
  if (best == 0) return 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = i + 1; k < n; ++k) {
      const double z = grid[k] - grid[i];
      if (z <= 0) continue;
      if (2 * top_sup <= best * std::pow(z, alpha)) break;
      best = std::max(best, std::abs(top[k] - top[i]) / std::pow(z, alpha));
    }
  return best;
}

// ---------------------------------------------------------------- Marginal

Marginal Marginal::gaussian(double sigma) {
  if (!(sigma > 0) || !std::isfinite(sigma))
    throw std::invalid_argument("gaussian sigma must be positive");
  Marginal m;
  m.kind_ = Kind::gaussian;
  m.sigma_ = sigma;
  return m;
}

Marginal Marginal::perturbed(double sigma, double beta, double L, double eps,
                             double lambda_scale) {
  if (!(sigma > 0)) throw std::invalid_argument("sigma must be positive");
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  if (!(L > 0)) throw std::invalid_argument("L must be positive");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("eps must lie in (0, 1)");
  Marginal m;
  m.kind_ = Kind::perturbed_gaussian;
  m.sigma_ = sigma;
  m.beta_ = beta;
  m.L_ = L;
  m.eps_ = eps;
  m.lambda_scale_ = lambda_scale;
  return m;
}

double Marginal::gaussian_part(double y) const { return gaussian_pdf(y, sigma_); }

double Marginal::lambda(double t) const {
  if (kind_ == Kind::gaussian) return 0;
  return lambda_scale_ * unit_lambda(t);
}

double Marginal::density(double y) const {
  double v = gaussian_pdf(y, sigma_);
  if (kind_ == Kind::perturbed_gaussian && std::abs(y) < eps_)
    v += L_ * std::pow(eps_, beta_) * lambda(y / eps_);
  return v;
}

double Marginal::derivative(int j, double y) const {
  double v = gaussian_derivative(j, y, sigma_);
  if (kind_ == Kind::perturbed_gaussian && std::abs(y) < 1.1 * eps_)
    v += L_ * std::pow(eps_, beta_ - j) * lambda_scale_ *
         unit_lambda_derivative(j, y / eps_);
  return v;
}

double Marginal::cdf(double y) const {
  double v = 0.5 * std::erfc(-y / (sigma_ * std::numbers::sqrt2));
  if (kind_ == Kind::perturbed_gaussian && y > -eps_) {
    const double upper = std::min(y / eps_, 1.0);
    const std::array<double, 3> breaks{-0.5, 0.0, 0.5};
    const double integral =
        quad::integrate<double>([this](double t) { return lambda(t); }, -1.0, upper,
                                1e-15, std::span<const double>(breaks))
            .value;
    v += L_ * std::pow(eps_, beta_ + 1) * integral;
  }
  return v;
}

std::vector<double> Marginal::certification_grid() const {
  auto grid = linspace(-8 * sigma_, 8 * sigma_, 4001);
  if (kind_ == Kind::perturbed_gaussian) {
    auto fine = linspace(-eps_, eps_, 2001);
    grid.insert(grid.end(), fine.begin(), fine.end());
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  }
  return grid;
}

std::vector<double> Marginal::breakpoints() const {
  if (kind_ == Kind::gaussian) return {};
  return {-eps_, -eps_ / 2, eps_ / 2, eps_};
}

double Marginal::draw(Philox &rng) const {
  if (kind_ == Kind::gaussian) return sigma_ * rng.normal();
  for (;;) {
    const double y = sigma_ * rng.normal();
    const double u = rng.uniform();
    if (u * kEnvelopeFactor * gaussian_pdf(y, sigma_) <= density(y)) return y;
  }
}

Certification holder_certify(const Marginal &m, double beta, double L) {
  const auto grid = m.certification_grid();
  return holder_check([&m](int j, double y) { return m.derivative(j, y); }, grid, beta,
                      L);
}

double calibrate_sigma(double beta, double L) {
  auto passes = [&](double sigma) {
    const auto g = Marginal::gaussian(sigma);
    const auto grid = g.certification_grid();
    return holder_check([&g](int j, double y) { return g.derivative(j, y); }, grid, beta,
                        L, 1.0)
        .pass;
  };
  double lo = 1, hi = 1;
  if (passes(1)) {
    while (passes(lo)) {
      hi = lo;
      lo /= 2;
      if (lo < 1e-12) throw NumericError("calibrate_sigma: no failing sigma found");
    }
  } else {
    while (!passes(hi)) {
      lo = hi;
      hi *= 2;
      if (hi > 1e12) throw NumericError("calibrate_sigma: no passing sigma found");
    }
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = (lo + hi) / 2;
    (passes(mid) ? hi : lo) = mid;
  }
  return hi;
}

double calibrate_lambda_scale(double beta) {
  const auto grid = linspace(-1, 1, 2001);
  const double norm = holder_norm(unit_lambda_derivative, grid, beta);
  if (!(norm > 0)) throw NumericError("calibrate_lambda_scale: degenerate lambda");
  return 0.5 / norm;
}

Marginal make_perturbed_marginal(double beta, double L, double eps) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  if (!(L > 0)) throw std::invalid_argument("L must be positive");
  if (!(eps > 0 && eps < 1)) throw std::invalid_argument("eps must lie in (0, 1)");
  const double sigma = calibrate_sigma(beta, L / 2);
  const double scale = calibrate_lambda_scale(beta);
  auto m = Marginal::perturbed(sigma, beta, L, eps, scale);
  for (double y : m.certification_grid()) {
    const double p = m.density(y);
    if (!(p > 0))
      throw NumericError("perturbed marginal is not positive", "y=" + std::to_string(y));
    if (p > kEnvelopeFactor * m.gaussian_part(y))
      throw NumericError("rejection envelope does not dominate the density",
                         "y=" + std::to_string(y));
  }
  const auto cert = holder_certify(m, beta, L);
  if (!cert) throw NumericError("Hölder certification failed", cert.violation);
  return m;
}

double lower_bound_eps(double varpi, double L, double capacity, double n, double beta) {
  return std::pow(varpi * capacity / (L * L * n), 1.0 / (2 * beta + 1));
}

// ------------------------------------------------------------------- Model

Model::Model(Unchecked, Marginal m1, Marginal m2, Rotation rotation, double beta,
             double L, std::string id)
    : m1_(m1), m2_(m2), rotation_(rotation), beta_(beta), L_(L), id_(std::move(id)) {
  if (!(beta > 0)) throw std::invalid_argument("beta must be positive");
  if (!(L > 0)) throw std::invalid_argument("L must be positive");
}

Model::Model(Marginal m1, Marginal m2, Rotation rotation, double beta, double L,
             std::string id)
    : Model(Unchecked{}, m1, m2, rotation, beta, L, std::move(id)) {
  const Marginal *marginals[2] = {&m1_, &m2_};
  for (int i = 0; i < 2; ++i) {
    const auto cert = holder_certify(*marginals[i], beta, L);
    if (!cert)
      throw NumericError("marginal" + std::to_string(i + 1) +
                             " fails Hölder certification",
                         cert.violation);
  }
}

Model Model::uncertified(Marginal m1, Marginal m2, Rotation rotation, double beta,
                         double L, std::string id) {
  return Model(Unchecked{}, m1, m2, rotation, beta, L, std::move(id));
}

double Model::density(const Point &x) const {
  const Point u = rotation_.matrix().transpose() * x;
  return m1_.density(u(0)) * m2_.density(u(1));
}

Model Model::rotated(const Rotation &r) const {
  return Model(Unchecked{}, m1_, m2_, r * rotation_, beta_, L_, id_);
}

bool Model::rotation_invariant() const {
  return m1_.kind() == Marginal::Kind::gaussian &&
         m2_.kind() == Marginal::Kind::gaussian && m1_.sigma() == m2_.sigma();
}

Sample sample(const Model &m, Eigen::Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  Philox rng(seed);
  Sample s;
  s.seed = seed;
  s.model_id = m.id();
  s.points.resize(n, 2);
  const Eigen::Matrix2d q = m.rotation().matrix();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector2d xi;
    xi(0) = m.marginal1().draw(rng);
    xi(1) = m.marginal2().draw(rng);
    s.points.row(i) = (q * xi).transpose();
  }
  return s;
}

// -------------------------------------------------------- quadrature oracles

double combination_density(const Marginal &g1, const Marginal &g2, double a1, double a2,
                           double w) {
  if (std::abs(a2) < 1e-14) return g1.density(w);
  if (std::abs(a1) < 1e-14) return g2.density(w);
  // xi1 = a1 w - a2 t, xi2 = a2 w + a1 t (orthonormal change of variables)
  return product_integral(g1, a1 * w, -a2, g2, a2 * w, a1);
}

double tau_oracle(const Model &m, const Rotation &d, const Point &x) {
  if (same_rotation(d, m.rotation())) return m.density(x);
  const auto [p1, p2] = overlap_coeffs(d, m.rotation());
  if (std::abs(p1) < kTauP1Floor)
    throw NumericError("tau_oracle: |p1| below floor for D != Q_f");
  Eigen::Matrix2d omega;
  omega << 0, 1, 1, 0;
  const Point a = d.matrix() * omega * x / p1;
  // g(p1 Gamma u) g(a + p2 Omega Gamma u) separates into two 1-D integrals:
  //   [int g1(p1 u1) g2(a2 + p2 u1) du1] [int g2(-p1 u2) g1(a1 - p2 u2) du2].
  const double first = product_integral(m.marginal1(), 0, p1, m.marginal2(), a(1), p2);
  const double second = product_integral(m.marginal2(), 0, -p1, m.marginal1(), a(0), -p2);
  return first * second;
}

double expected_directional_kde(const Model &m, const Kernel &k, const Point &x,
                                double h, const Eigen::Vector2d &b) {
  const double c1 = m.rotation().col().dot(b);
  const double c2 = m.rotation().col_perp().dot(b);
  const double a0 = b.dot(x);
  auto integrand = [&](double v) {
    return k(v) * combination_density(m.marginal1(), m.marginal2(), c1, c2, a0 + h * v);
  };
  std::vector<double> breaks{0.0};
  for (const Marginal *g : {&m.marginal1(), &m.marginal2()})
    for (double e : g->breakpoints()) breaks.push_back((e - a0) / h);
  return quad::integrate<double>(integrand, -1.0, 1.0, 1e-11,
                                 std::span<const double>(breaks))
      .value;
}

double expected_auxiliary(const Model &m, const Kernel &k, const Point &x, double h,
                          const Rotation &d, const Rotation &q, int nodes) {
  const auto [p1, p2] = overlap_coeffs(d, q);
  Eigen::Matrix2d omega, gamma;
  omega << 0, 1, 1, 0;
  gamma << 1, 0, 0, -1;
  const Point center = omega * gamma * q.matrix() * d.matrix() * omega * x;
  const Eigen::Matrix2d qf_t = m.rotation().matrix().transpose();
  const auto [v, w] = quad::gauss_legendre<double>(nodes);
  // Z = p1 Omega Gamma X + p2 X' = Q_f W with independent coordinates
  //   W1 = p2 xi1' - p1 xi2,  W2 = p1 xi1 + p2 xi2'.
  double total = 0;
  for (int i = 0; i < nodes; ++i) {
    const double ki = k(v(i));
    if (ki == 0) continue;
    for (int j = 0; j < nodes; ++j) {
      const double kj = k(v(j));
      if (kj == 0) continue;
      const Point z = center + h * Point(v(i), v(j));
      const Point wz = qf_t * z;
      const double rho1 =
          combination_density(m.marginal1(), m.marginal2(), p2, -p1, wz(0));
      const double rho2 = combination_density(m.marginal1(), m.marginal2(), p1, p2, wz(1));
      total += w(i) * w(j) * ki * kj * rho1 * rho2;
    }
  }
  return total;
}

}  // namespace rotkde
