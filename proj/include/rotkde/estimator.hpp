#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "rotkde/kernel.hpp"
#include "rotkde/rotation.hpp"

namespace rotkde {

enum class UStatMode { naive, pruned };

/// Geometric bandwidth grid H = {e^-k, k = 0..floor(ln n)} and its
/// restriction mH = {h in H : 1/ln(ln n) >= h >= (ln n)^2 / n}.
class BandwidthGrid {
 public:
  /// Smallest n accepted by the n-based constructor.
  static constexpr long kMinimumN = 16;

  explicit BandwidthGrid(long n) : n_(n) {
    if (n < kMinimumN)
      throw std::invalid_argument("bandwidth grid needs n >= " +
                                  std::to_string(kMinimumN) + ", got " +
                                  std::to_string(n));
    const double ln_n = std::log(static_cast<double>(n));
    const double upper = 1.0 / std::log(ln_n);
    const double lower = ln_n * ln_n / static_cast<double>(n);
    const long kmax = static_cast<long>(std::floor(ln_n));
    for (long k = 0; k <= kmax; ++k) {
      const double h = std::exp(-static_cast<double>(k));
      values_.push_back(h);
      if (h <= upper && h >= lower) restricted_.push_back(h);
    }
    if (restricted_.empty())
      throw std::invalid_argument(
          "restricted bandwidth grid is empty for n = " + std::to_string(n) +
          " ((ln n)^2/n exceeds every grid point below 1/ln(ln n))");
  }

  /// Explicit grids (both strictly decreasing, restricted a subset of values).
  static BandwidthGrid from_values(long n, std::vector<double> values,
                                   std::vector<double> restricted) {
    if (restricted.empty()) throw std::invalid_argument("restricted grid is empty");
    for (std::size_t i = 1; i < values.size(); ++i)
      if (!(values[i] < values[i - 1]))
        throw std::invalid_argument("bandwidth grid must be strictly decreasing");
    for (std::size_t i = 1; i < restricted.size(); ++i)
      if (!(restricted[i] < restricted[i - 1]))
        throw std::invalid_argument("bandwidth grid must be strictly decreasing");
    for (double h : restricted)
      if (std::find(values.begin(), values.end(), h) == values.end())
        throw std::invalid_argument("restricted grid must be a subset of the full grid");
    BandwidthGrid g;
    g.n_ = n;
    g.values_ = std::move(values);
    g.restricted_ = std::move(restricted);
    return g;
  }

  long n() const { return n_; }
  const std::vector<double> &values() const { return values_; }
  const std::vector<double> &restricted() const { return restricted_; }

 private:
  BandwidthGrid() = default;

  long n_{0};
  std::vector<double> values_;
  std::vector<double> restricted_;
};

namespace detail {

/// Neumaier compensated accumulator.
template <typename Scalar>
struct CompensatedSum {
  Scalar sum{0};
  Scalar carry{0};

  void add(Scalar v) {
    const Scalar t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  Scalar value() const { return sum + carry; }
};

template <typename Derived>
void check_points(const Eigen::MatrixBase<Derived> &points) {
  static_assert(Derived::ColsAtCompileTime == 2 || Derived::ColsAtCompileTime == Eigen::Dynamic,
                "points must be an n x 2 matrix");
  if (points.cols() != 2) throw std::invalid_argument("points must have two columns");
}

}  // namespace detail

/// n^-1 sum_k K_h(b^T (X_k - x)); b must be a unit vector.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar directional_kde(const Eigen::MatrixBase<Derived> &points,
                       const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                       const Eigen::Matrix<Scalar, 2, 1> &b,
                       const BasicKernel<Scalar> &k) {
  detail::check_points(points);
  if (!(h > 0)) throw std::invalid_argument("bandwidth must be positive");
  if (std::abs(b.norm() - Scalar(1)) > Scalar(1e-12))
    throw std::invalid_argument("direction must be a unit vector");
  const Eigen::Index n = points.rows();
  const Scalar offset = b.dot(x);
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    acc += k((b(0) * points(i, 0) + b(1) * points(i, 1) - offset) / h);
  return acc / (h * static_cast<Scalar>(n));
}

/// n^-1 sum_k |K_h(b^T (X_k - x))| (the averages entering U_hat).
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar directional_abs_kde(const Eigen::MatrixBase<Derived> &points,
                           const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                           const Eigen::Matrix<Scalar, 2, 1> &b,
                           const BasicKernel<Scalar> &k) {
  detail::check_points(points);
  if (!(h > 0)) throw std::invalid_argument("bandwidth must be positive");
  const Eigen::Index n = points.rows();
  const Scalar offset = b.dot(x);
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    acc += std::abs(k((b(0) * points(i, 0) + b(1) * points(i, 1) - offset) / h));
  return acc / (h * static_cast<Scalar>(n));
}

/// Product estimator  [n^-1 sum K_h(d^T(X_k - x))] [n^-1 sum K_h(d_perp^T(X_k - x))].
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar product_estimate(const Eigen::MatrixBase<Derived> &points,
                        const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                        const BasicRotation<Scalar> &d, const BasicKernel<Scalar> &k) {
  return directional_kde(points, x, h, d.col(), k) *
         directional_kde(points, x, h, d.col_perp(), k);
}

/// Per-coordinate sort orders of a sample, reused across every
/// (h, D, Q) evaluation of the pruned U-statistic.
template <typename Scalar>
class BasicPrunedIndex {
 public:
  template <typename Derived>
  explicit BasicPrunedIndex(const Eigen::MatrixBase<Derived> &points) {
    detail::check_points(points);
    const Eigen::Index n = points.rows();
    for (int c = 0; c < 2; ++c) {
      order_[c].resize(n);
      std::iota(order_[c].begin(), order_[c].end(), Eigen::Index{0});
      std::stable_sort(order_[c].begin(), order_[c].end(),
                       [&](Eigen::Index a, Eigen::Index b) {
                         return points(a, c) < points(b, c);
                       });
      sorted_[c].resize(n);
      for (Eigen::Index i = 0; i < n; ++i) sorted_[c][i] = points(order_[c][i], c);
    }
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(sorted_[0].size()); }

  /// Positions [first, last) in the coordinate-c order with value in [lo, hi].
  std::pair<std::size_t, std::size_t> range(int c, Scalar lo, Scalar hi) const {
    const auto &v = sorted_[c];
    const auto first = std::lower_bound(v.begin(), v.end(), lo) - v.begin();
    const auto last = std::upper_bound(v.begin(), v.end(), hi) - v.begin();
    return {static_cast<std::size_t>(first),
            static_cast<std::size_t>(std::max(first, last))};
  }

  Eigen::Index original(int c, std::size_t pos) const { return order_[c][pos]; }

 private:
  std::vector<Eigen::Index> order_[2];
  std::vector<Scalar> sorted_[2];
};

using PrunedIndex = BasicPrunedIndex<double>;

namespace detail {

// K(t1/h) K(t2/h) for the summand with t1 = a_k + p2 X_{l,1}, t2 = b_k + p2 X_{l,2}.
template <typename Scalar>
inline Scalar ustat_term(const BasicKernel<Scalar> &k, Scalar a_k, Scalar b_k,
                         Scalar p2, Scalar xl1, Scalar xl2, Scalar h) {
  const Scalar k1 = k((a_k + p2 * xl1) / h);
  if (k1 == Scalar(0)) return Scalar(0);
  return k1 * k((b_k + p2 * xl2) / h);
}

}  // namespace detail

/// Order-2 U-statistic
///   1/(n(n-1)) sum_{k != l} K_h(p1 Omega Gamma X_k + p2 X_l - Omega Gamma Q D Omega x)
/// with K_h(t) = K_h(t1) K_h(t2) and (p1, p2) = overlap(D, Q); falls back to
/// the product estimator when D = Q. Pruned mode restricts l to the kernel
/// support via the sorted-coordinate index and matches naive to rounding.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar auxiliary_estimate(const Eigen::MatrixBase<Derived> &points,
                          const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                          const BasicRotation<Scalar> &d, const BasicRotation<Scalar> &q,
                          const BasicKernel<Scalar> &k, UStatMode mode = UStatMode::pruned,
                          const BasicPrunedIndex<Scalar> *index = nullptr) {
  detail::check_points(points);
  if (!(h > 0)) throw std::invalid_argument("bandwidth must be positive");
  if (same_rotation(d, q)) return product_estimate(points, x, h, q, k);
  const Eigen::Index n = points.rows();
  if (n < 2) throw std::invalid_argument("auxiliary estimator needs n >= 2 when D != Q");

  const auto [p1, p2] = overlap_coeffs(d, q);
  Eigen::Matrix<Scalar, 2, 2> omega, gamma;
  omega << 0, 1, 1, 0;
  gamma << 1, 0, 0, -1;
  const Eigen::Matrix<Scalar, 2, 1> c = omega * gamma * q.matrix() * d.matrix() * omega * x;

  detail::CompensatedSum<Scalar> total;
  if (mode == UStatMode::naive) {
    for (Eigen::Index kk = 0; kk < n; ++kk) {
      const Scalar a_k = -p1 * points(kk, 1) - c(0);
      const Scalar b_k = p1 * points(kk, 0) - c(1);
      for (Eigen::Index l = 0; l < n; ++l) {
        if (l == kk) continue;
        const Scalar t = detail::ustat_term(k, a_k, b_k, p2, points(l, 0), points(l, 1), h);
        if (t != Scalar(0)) total.add(t);
      }
    }
  } else {
    std::optional<BasicPrunedIndex<Scalar>> local;
    if (index == nullptr || index->size() != n) {
      local.emplace(points);
      index = &*local;
    }
    const Scalar support = k.support() * h;
    for (Eigen::Index kk = 0; kk < n; ++kk) {
      const Scalar a_k = -p1 * points(kk, 1) - c(0);
      const Scalar b_k = p1 * points(kk, 0) - c(1);
      std::size_t first = 0, last = static_cast<std::size_t>(n);
      int coord = 0;
      if (std::abs(p2) > Scalar(1e-300)) {
        // |a_k + p2 X_l1| <= h  and  |b_k + p2 X_l2| <= h
        auto interval = [&](Scalar shift) {
          Scalar lo = (-support - shift) / p2, hi = (support - shift) / p2;
          if (lo > hi) std::swap(lo, hi);
          const Scalar pad = Scalar(1e-9) * (std::abs(lo) + std::abs(hi) + support);
          return std::pair{lo - pad, hi + pad};
        };
        const auto [lo1, hi1] = interval(a_k);
        const auto [lo2, hi2] = interval(b_k);
        const auto r1 = index->range(0, lo1, hi1);
        const auto r2 = index->range(1, lo2, hi2);
        if (r2.second - r2.first < r1.second - r1.first) {
          coord = 1;
          std::tie(first, last) = r2;
        } else {
          std::tie(first, last) = r1;
        }
      }
      for (std::size_t pos = first; pos < last; ++pos) {
        const Eigen::Index l = index->original(coord, pos);
        if (l == kk) continue;
        const Scalar t = detail::ustat_term(k, a_k, b_k, p2, points(l, 0), points(l, 1), h);
        if (t != Scalar(0)) total.add(t);
      }
    }
  }
  const Scalar nn = static_cast<Scalar>(n);
  return total.value() / (h * h * nn * (nn - 1));
}

/// f~_{h,(D,Q)}: product estimator when D = Q, U-statistic otherwise.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar combined_estimate(const Eigen::MatrixBase<Derived> &points,
                         const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                         const BasicRotation<Scalar> &d, const BasicRotation<Scalar> &q,
                         const BasicKernel<Scalar> &k, UStatMode mode = UStatMode::pruned,
                         const BasicPrunedIndex<Scalar> *index = nullptr) {
  if (same_rotation(d, q)) return product_estimate(points, x, h, q, k);
  return auxiliary_estimate(points, x, h, d, q, k, mode, index);
}

/// 2-D product-kernel estimator in the original coordinates.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar isotropic_estimate(const Eigen::MatrixBase<Derived> &points,
                          const Eigen::Matrix<Scalar, 2, 1> &x, Scalar h,
                          const BasicKernel<Scalar> &k) {
  detail::check_points(points);
  if (!(h > 0)) throw std::invalid_argument("bandwidth must be positive");
  const Eigen::Index n = points.rows();
  Scalar acc = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar k1 = k((points(i, 0) - x(0)) / h);
    if (k1 == Scalar(0)) continue;
    acc += k1 * k((points(i, 1) - x(1)) / h);
  }
  return acc / (h * h * static_cast<Scalar>(n));
}

}  // namespace rotkde
