#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "rotkde/quadrature.hpp"

namespace rotkde {

/// Even polynomial kernel on [-1, 1] with vanishing moments up to 2*order.
///
/// Built as the reproducing kernel of the polynomials of degree <= 2*order
/// evaluated at the origin:  K(u) = sum_j phi_j(0) phi_j(u)  with phi_j the
/// orthonormal Legendre polynomials. Hence  int u^j K(u) du = [j == 0]  for
/// every j <= 2*order.
template <typename Scalar>
class BasicKernel {
 public:
  using Coefficients = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit BasicKernel(int order_floor);

  int order_floor() const { return order_; }
  int degree() const { return 2 * order_; }
  Scalar support() const { return Scalar(1); }

  /// Monomial coefficients c_0..c_{2m}; odd entries are exactly zero.
  const Coefficients &coeffs() const { return coeffs_; }

  Scalar sup_norm() const { return sup_norm_; }
  Scalar l1_norm() const { return l1_norm_; }
  Scalar l2_norm_sq() const { return l2_norm_sq_; }

  /// Roots of K in (0, 1), ascending.
  const std::vector<Scalar> &positive_roots() const { return roots_; }

  /// K(u); exactly zero for |u| > 1.
  Scalar operator()(Scalar u) const {
    if (std::abs(u) > Scalar(1)) return Scalar(0);
    const Scalar u2 = u * u;
    Scalar acc = coeffs_(2 * order_);
    for (int j = 2 * order_ - 2; j >= 0; j -= 2) acc = acc * u2 + coeffs_(j);
    return acc;
  }

  /// Scaled kernel K_h(t) = K(t / h) / h.
  Scalar scaled(Scalar t, Scalar h) const { return (*this)(t / h) / h; }

 private:
  void find_roots();

  int order_;
  Coefficients coeffs_;
  std::vector<Scalar> roots_;
  Scalar sup_norm_{0};
  Scalar l1_norm_{0};
  Scalar l2_norm_sq_{0};
};

using Kernel = BasicKernel<double>;

template <typename Scalar>
BasicKernel<Scalar>::BasicKernel(int order_floor) : order_(order_floor) {
  if (order_floor < 0)
    throw std::invalid_argument("kernel order must be nonnegative");
  const int deg = 2 * order_;
  // Legendre monomial coefficients via Bonnet's recursion, in long double.
  std::vector<std::vector<long double>> legendre(deg + 1,
                                                 std::vector<long double>(deg + 1, 0));
  legendre[0][0] = 1;
  if (deg >= 1) legendre[1][1] = 1;
  for (int j = 1; j < deg; ++j)
    for (int i = 0; i <= deg; ++i) {
      long double next = 0;
      if (i > 0) next += (2 * j + 1) * legendre[j][i - 1];
      next -= j * legendre[j - 1][i];
      legendre[j + 1][i] = next / (j + 1);
    }
  std::vector<long double> sum(deg + 1, 0);
  for (int j = 0; j <= deg; j += 2) {
    const long double weight = (2 * j + 1) / 2.0L * legendre[j][0];
    for (int i = 0; i <= deg; ++i) sum[i] += weight * legendre[j][i];
  }
  coeffs_ = Coefficients::Zero(deg + 1);
  for (int i = 0; i <= deg; i += 2) coeffs_(i) = Scalar(sum[i]);

  find_roots();

  // ||K||_2^2 from the exact polynomial square.
  long double l2 = 0;
  for (int i = 0; i <= deg; i += 2)
    for (int j = 0; j <= deg; j += 2)
      l2 += 2.0L * sum[i] * sum[j] / (i + j + 1);
  l2_norm_sq_ = Scalar(l2);

  // ||K||_inf: the max of |K| sits at an endpoint or a critical point.
  std::vector<Scalar> candidates{Scalar(0), Scalar(1)};
  const int grid = 4000;
  for (int i = 1; i < grid; ++i) {
    const Scalar a = Scalar(i - 1) / grid, b = Scalar(i + 1) / grid;
    const Scalar m = Scalar(i) / grid;
    if (std::abs((*this)(m)) >= std::abs((*this)(a)) &&
        std::abs((*this)(m)) >= std::abs((*this)(b))) {
      Scalar lo = a, hi = b;
      for (int it = 0; it < 200 && hi - lo > Scalar(1e-15); ++it) {
        const Scalar m1 = lo + (hi - lo) / 3, m2 = hi - (hi - lo) / 3;
        if (std::abs((*this)(m1)) < std::abs((*this)(m2)))
          lo = m1;
        else
          hi = m2;
      }
      candidates.push_back((lo + hi) / 2);
    }
  }
  for (Scalar c : candidates)
    sup_norm_ = std::max(sup_norm_, std::abs((*this)(c)));

  // ||K||_1 by adaptive quadrature split at the roots (|K| has kinks there).
  auto abs_k = [this](Scalar u) { return std::abs((*this)(u)); };
  l1_norm_ = 2 * quad::integrate<Scalar>(abs_k, Scalar(0), Scalar(1),
                                         Scalar(1e-13), std::span<const Scalar>(roots_))
                     .value;
}

template <typename Scalar>
void BasicKernel<Scalar>::find_roots() {
  roots_.clear();
  const int grid = 20000;
  Scalar prev_u = 0, prev = (*this)(Scalar(0));
  for (int i = 1; i <= grid; ++i) {
    const Scalar u = Scalar(i) / grid;
    const Scalar val = (*this)(u);
    if (val == Scalar(0) && i < grid) {
      roots_.push_back(u);
    } else if ((prev < 0) != (val < 0) && prev != Scalar(0)) {
      Scalar lo = prev_u, hi = u;
      for (int it = 0; it < 200; ++it) {
        const Scalar mid = (lo + hi) / 2;
        if (mid <= lo || mid >= hi) break;
        if (((*this)(mid) < 0) == (prev < 0))
          lo = mid;
        else
          hi = mid;
      }
      roots_.push_back((lo + hi) / 2);
    }
    prev_u = u;
    prev = val;
  }
}

/// Number of bracket exponents b' evaluated by capacity_constant.
inline constexpr int kCapacityGridSize = 32;

namespace detail {

/// F(b') = int_{[-1,1]^2} |K(t1) K(t2)| [s (t1^2 + t2^2)^{b'} + 1]^2 dt.
template <typename Scalar>
Scalar capacity_integral(const BasicKernel<Scalar> &k, Scalar bp, Scalar s) {
  std::span<const Scalar> breaks(k.positive_roots());
  auto integrand = [&](Scalar t1, Scalar t2) {
    const Scalar r2 = t1 * t1 + t2 * t2;
    const Scalar bracket = s * std::pow(r2, bp) + 1;
    return std::abs(k(t1) * k(t2)) * bracket * bracket;
  };
  // Symmetric in each coordinate: integrate the quarter square.
  return 4 * quad::integrate2d<Scalar>(integrand, Scalar(0), Scalar(1),
                                       Scalar(0), Scalar(1), Scalar(2e-9),
                                       breaks, breaks)
                 .value;
}

}  // namespace detail

/// C(K, b, s) = sup_{0 < b' <= b} int |K(t1)K(t2)| [s(t1^2+t2^2)^{b'} + 1]^2 dt.
///
/// Evaluated on b' in {b/32, 2b/32, ..., b} together with the b' -> 0+ limit
/// (s + 1)^2 ||K||_1^2. The integral is convex in b' (a positive mixture of
/// exponentials in b'), so the supremum over (0, b] is attained at one of the
/// two ends and the grid maximum is exact.
template <typename Scalar>
Scalar capacity_constant(const BasicKernel<Scalar> &k, Scalar b, Scalar s) {
  if (!(b > 0) || !(s > 0))
    throw std::invalid_argument("capacity_constant requires b > 0 and s > 0");
  Scalar best = (s + 1) * (s + 1) * k.l1_norm() * k.l1_norm();
  for (int i = 1; i <= kCapacityGridSize; ++i)
    best = std::max(best, detail::capacity_integral(k, b * i / kCapacityGridSize, s));
  return best;
}

}  // namespace rotkde
