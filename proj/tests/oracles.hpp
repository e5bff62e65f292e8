#pragma once

// Independent numerical oracles for the unit and acceptance tests. None of
// these reuse the library's adaptive Gauss–Kronrod quadrature.

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "rotkde/kernel.hpp"

namespace oracle {

/// Tanh-sinh (double exponential) rule on [a, b] with step h; robust to
/// integrable endpoint singularities and kinks placed at the endpoints.
inline double tanh_sinh(const std::function<double(double)> &f, double a, double b,
                        double h = 1.0 / 32) {
  const double half = (b - a) / 2, mid = (a + b) / 2;
  double sum = 0;
  for (int k = -static_cast<int>(4.0 / h); k <= static_cast<int>(4.0 / h); ++k) {
    const double t = k * h;
    const double u = std::numbers::pi / 2 * std::sinh(t);
    const double ch = std::cosh(u);
    const double w = std::numbers::pi / 2 * std::cosh(t) / (ch * ch);
    if (w < 1e-300) continue;
    // 1 - |x| computed without cancellation.
    const double one_minus = 1.0 / (std::exp(std::abs(u)) * ch);
    const double x = t < 0 ? -1 + one_minus : 1 - one_minus;
    if (one_minus <= 0) continue;
    sum += w * f(mid + half * x);
  }
  return sum * half * h;
}

/// Tanh-sinh over consecutive segments of `cuts` (ascending, including ends).
inline double tanh_sinh_pieces(const std::function<double(double)> &f,
                               const std::vector<double> &cuts, double h = 1.0 / 32) {
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) total += tanh_sinh(f, cuts[i], cuts[i + 1], h);
  return total;
}

/// int_{-1}^{1} u^j p(u) du for p given by monomial coefficients, exactly.
inline double polynomial_moment(const std::vector<double> &coeffs, int j) {
  double total = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i)
    if ((i + j) % 2 == 0) total += 2.0 * coeffs[i] / static_cast<double>(i + j + 1);
  return total;
}

/// Composite midpoint rule with n cells on [a, b].
inline double midpoint(const std::function<double(double)> &f, double a, double b, long n) {
  const double h = (b - a) / n;
  double s = 0;
  for (long i = 0; i < n; ++i) s += f(a + (i + 0.5) * h);
  return s * h;
}

/// C(K, b, s) recomputed with nested tanh-sinh over the quarter square split
/// at the kernel's roots, over b' in {b/32, ..., b} plus the b' -> 0+ limit.
inline double capacity_constant(const rotkde::Kernel &k, double b, double s) {
  std::vector<double> cuts{0.0};
  for (double r : k.positive_roots()) cuts.push_back(r);
  cuts.push_back(1.0);
  const double l1 = k.l1_norm();
  double best = (s + 1) * (s + 1) * l1 * l1;
  for (int i = 1; i <= 32; ++i) {
    const double bp = b * i / 32;
    auto outer = [&](double t1) {
      auto inner = [&](double t2) {
        const double br = s * std::pow(t1 * t1 + t2 * t2, bp) + 1;
        return std::abs(k(t1) * k(t2)) * br * br;
      };
      return tanh_sinh_pieces(inner, cuts, 1.0 / 16);
    };
    best = std::max(best, 4 * tanh_sinh_pieces(outer, cuts, 1.0 / 16));
  }
  return best;
}

/// 12 (10 p alpha)^(1/2) (1 + (5p)^(1/2)) max(1, sup) + 4 C.
inline double constant_A(double p, double alpha, double sup, double c) {
  return 12 * std::pow(10 * p * alpha, 0.5) * (1 + std::pow(5 * p, 0.5)) * (sup > 1 ? sup : 1) +
         4 * c;
}

/// 527730 p^2 6^(1/2) N (9 + 4 alpha)^((3b+3)/(2b+1)) Cb^(3/2) L^((4b+8)/(2b+1)) + 8 C L^2.
inline double constant_B(double p, double alpha, double beta, double L, double norms, double cb,
                         double c) {
  const double e1 = (3 * beta + 3) / (2 * beta + 1), e2 = (4 * beta + 8) / (2 * beta + 1);
  return 527730 * p * p * std::pow(6.0, 0.5) * norms * std::exp(e1 * std::log(9 + 4 * alpha)) *
             cb * std::sqrt(cb) * std::exp(e2 * std::log(L)) +
         8 * c * L * L;
}

/// max(1, max over n = 3..1e6 of (ln^2 n / n)^(2b/(2b+1)) (ln n)^(2/(2b+1))), direct powers.
inline double c_beta_scan(double beta) {
  double best = 1;
  for (long n = 3; n <= 1000000; ++n) {
    const double l = std::log(static_cast<double>(n));
    best = std::max(best, std::pow(l * l / n, 2 * beta / (2 * beta + 1)) *
                              std::pow(l, 2 / (2 * beta + 1)));
  }
  return best;
}

}  // namespace oracle
