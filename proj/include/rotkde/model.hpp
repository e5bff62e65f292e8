#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rotkde/kernel.hpp"
#include "rotkde/random.hpp"
#include "rotkde/rotation.hpp"

namespace rotkde {

using Point = Eigen::Vector2d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Smooth bump exp(-1/(1 - y^2)) on (-1, 1), zero outside.
double bump(double y);

/// Central finite-difference weights of accuracy order 6 for the j-th
/// derivative on the stencil -p..p (Fornberg's algorithm).
std::vector<double> central_difference_weights(int derivative);

/// j-th derivative of f at y by sixth-order central differences, step `step`.
double finite_difference(const std::function<double(double)> &f, int derivative,
                         double y, double step = 1e-3);

/// Outcome of a Hölder-class check; the violating grid pair is recorded.
struct Certification {
  bool pass{true};
  /// max over checks of observed / allowed (<= 1 means inside the class).
  double worst_ratio{0};
  std::string violation;
  double y{0};
  double z{0};

  explicit operator bool() const { return pass; }
};

/// Hölder norm bookkeeping for w in H(beta, L) on a sorted grid:
/// |w^(j)| <= L for j = 0..r and |w^(r)(y+z) - w^(r)(y)| <= L |z|^alpha,
/// with beta = r + alpha, r = ceil(beta) - 1. `slack` multiplies L.
Certification holder_check(const std::function<double(int, double)> &derivative,
                           std::span<const double> grid, double beta, double L,
                           double slack = 1.02);

/// Smallest L for which holder_check passes with slack 1 on the grid.
double holder_norm(const std::function<double(int, double)> &derivative,
                   std::span<const double> grid, double beta);

/// Symmetric univariate density: centered Gaussian or Gaussian plus a
/// compactly supported perturbation L eps^beta lambda(y / eps) with
/// lambda(t) = c (2 B(2t) - B(t)).
class Marginal {
 public:
  enum class Kind { gaussian, perturbed_gaussian };

  static Marginal gaussian(double sigma);
  /// Raw perturbed marginal with explicit sigma and lambda scale c; no checks.
  static Marginal perturbed(double sigma, double beta, double L, double eps,
                            double lambda_scale);

  Kind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  double beta() const { return beta_; }
  double L() const { return L_; }
  double eps() const { return eps_; }
  double lambda_scale() const { return lambda_scale_; }

  double density(double y) const;
  double operator()(double y) const { return density(y); }
  /// j-th derivative; closed form for the Gaussian part, finite differences
  /// for the perturbation.
  double derivative(int j, double y) const;
  /// The perturbation lambda(t) (zero for a Gaussian marginal).
  double lambda(double t) const;
  /// Gaussian component n(y).
  double gaussian_part(double y) const;

  /// CDF: exact Gaussian part plus quadrature of the perturbation.
  double cdf(double y) const;

  /// Certification grid: 4001 points on [-8 sigma, 8 sigma], plus 2001 on
  /// the perturbation support [-eps, eps] for perturbed marginals.
  std::vector<double> certification_grid() const;

  /// Points where the density is not analytic-looking to quadrature
  /// (perturbation support edges); empty for a Gaussian.
  std::vector<double> breakpoints() const;

  /// Half-width beyond which the density is below ~1e-30.
  double effective_support() const { return 12 * sigma_; }

  double draw(Philox &rng) const;

 private:
  Marginal() = default;

  Kind kind_{Kind::gaussian};
  double sigma_{1};
  double beta_{0};
  double L_{0};
  double eps_{0};
  double lambda_scale_{0};
};

/// Envelope factor of the rejection sampler: p(y) <= 1.5 n(y).
inline constexpr double kEnvelopeFactor = 1.5;

/// Hölder certification of a marginal on its certification grid.
Certification holder_certify(const Marginal &m, double beta, double L);

/// Smallest sigma (bisection) with the centered Gaussian in H(beta, L).
double calibrate_sigma(double beta, double L);

/// Scale c with c (2B(2t) - B(t)) certified in H(beta, 1/2).
double calibrate_lambda_scale(double beta);

/// p(y) = n(y) + L eps^beta lambda(y/eps) with n in H(beta, L/2) and
/// lambda in H(beta, 1/2). Throws NumericError when positivity, the
/// rejection envelope or the Hölder certification fails.
Marginal make_perturbed_marginal(double beta, double L, double eps);

/// eps = (varpi L^-2 capacity / n)^(1/(2 beta + 1)).
double lower_bound_eps(double varpi, double L, double capacity, double n, double beta);

/// f(x) = g1(u1) g2(u2), u = Q^T x, with g1, g2 in H(beta, L).
class Model {
 public:
  /// Certifies both marginals at (beta, L); throws NumericError on failure.
  Model(Marginal m1, Marginal m2, Rotation rotation, double beta, double L,
        std::string id = "model");

  /// Skips certification (used for deliberately invalid test fixtures).
  static Model uncertified(Marginal m1, Marginal m2, Rotation rotation, double beta,
                           double L, std::string id = "model");

  const Marginal &marginal1() const { return m1_; }
  const Marginal &marginal2() const { return m2_; }
  const Rotation &rotation() const { return rotation_; }
  double beta() const { return beta_; }
  double L() const { return L_; }
  const std::string &id() const { return id_; }

  double density(const Point &x) const;

  /// Same model with rotation R * Q.
  Model rotated(const Rotation &r) const;

  /// Both marginals are Gaussians with equal sigma: every rotation is valid.
  bool rotation_invariant() const;

 private:
  struct Unchecked {};
  Model(Unchecked, Marginal m1, Marginal m2, Rotation rotation, double beta, double L,
        std::string id);

  Marginal m1_, m2_;
  Rotation rotation_;
  double beta_, L_;
  std::string id_;
};

/// n observations in the plane with provenance.
struct Sample {
  Points points;
  std::uint64_t seed{0};
  std::string model_id;

  Eigen::Index n() const { return points.rows(); }
};

/// Draws n points X = Q xi with xi_1 ~ g1, xi_2 ~ g2; deterministic in seed.
Sample sample(const Model &m, Eigen::Index n, std::uint64_t seed);

/// Density of a1 xi_1 + a2 xi_2 at w for independent xi_i ~ g_i and a1^2 + a2^2 = 1.
double combination_density(const Marginal &g1, const Marginal &g2, double a1,
                           double a2, double w);

/// tau_f(D) = int g(p1 Gamma u) g(p1^-1 D Omega x + p2 Omega Gamma u) du with
/// (p1, p2) = overlap(D, Q_f); equals f(x) when D = Q_f.
double tau_oracle(const Model &m, const Rotation &d, const Point &x);

/// |p1| floor below which tau_oracle refuses D != Q_f.
inline constexpr double kTauP1Floor = 1e-8;

/// E_f[ n^-1 sum K_h(b^T(X_k - x)) ] by quadrature, ||b|| = 1.
double expected_directional_kde(const Model &m, const Kernel &k, const Point &x,
                                double h, const Eigen::Vector2d &b);

/// E_f of one U-statistic summand K_h(p1 Omega Gamma X + p2 X' - Omega Gamma Q D Omega x)
/// for independent X, X' ~ f, by tensor Gauss–Legendre over the kernel
/// support times adaptive 1-D convolutions.
double expected_auxiliary(const Model &m, const Kernel &k, const Point &x, double h,
                          const Rotation &d, const Rotation &q, int nodes = 48);

}  // namespace rotkde
