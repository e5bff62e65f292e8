#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rotkde/error.hpp"

namespace rotkde::quad {

/// Result of an adaptive integration: value and the Kronrod error estimate.
template <typename Scalar>
struct Estimate {
  Scalar value{0};
  Scalar error{0};
  int intervals{0};
};

namespace detail {

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename Scalar, typename F>
Estimate<Scalar> kronrod15(F &&f, Scalar a, Scalar b) {
  const Scalar center = (a + b) / 2;
  const Scalar half = (b - a) / 2;
  const Scalar fc = f(center);
  Scalar kronrod = fc * Scalar(kKronrodWeights[7]);
  Scalar gauss = fc * Scalar(kGaussWeights[3]);
  for (int j = 0; j < 7; ++j) {
    const Scalar dx = half * Scalar(kKronrodNodes[j]);
    const Scalar sum = f(center - dx) + f(center + dx);
    kronrod += Scalar(kKronrodWeights[j]) * sum;
    if (j % 2 == 1) gauss += Scalar(kGaussWeights[j / 2]) * sum;
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half), 1};
}

template <typename Scalar>
struct Segment {
  Scalar a, b;
  Estimate<Scalar> est;
  bool operator<(const Segment &o) const { return est.error < o.est.error; }
};

}  // namespace detail

/// Globally adaptive Gauss–Kronrod (G7/K15) integration over [a, b] with
/// optional interior breakpoints. Throws NumericError when the absolute
/// tolerance is not met within `max_intervals` subdivisions.
template <typename Scalar = double, typename F>
Estimate<Scalar> integrate(F &&f, Scalar a, Scalar b, Scalar abs_tol,
                           std::span<const Scalar> breakpoints = {},
                           int max_intervals = 4000) {
  if (!(b > a)) return {};
  std::vector<Scalar> edges{a};
  for (Scalar p : breakpoints)
    if (p > a && p < b) edges.push_back(p);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  std::priority_queue<detail::Segment<Scalar>> heap;
  Scalar value = 0, error = 0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    auto e = detail::kronrod15<Scalar>(f, edges[i], edges[i + 1]);
    value += e.value;
    error += e.error;
    heap.push({edges[i], edges[i + 1], e});
  }
  int count = static_cast<int>(heap.size());
  while (error > abs_tol && count < max_intervals) {
    auto worst = heap.top();
    heap.pop();
    const Scalar mid = (worst.a + worst.b) / 2;
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    auto left = detail::kronrod15<Scalar>(f, worst.a, mid);
    auto right = detail::kronrod15<Scalar>(f, mid, worst.b);
    value += left.value + right.value - worst.est.value;
    error += left.error + right.error - worst.est.error;
    heap.push({worst.a, mid, left});
    heap.push({mid, worst.b, right});
    ++count;
  }
  // Recompute from the leaves to avoid drift from the running updates.
  value = 0;
  error = 0;
  std::vector<detail::Segment<Scalar>> leaves;
  leaves.reserve(heap.size());
  while (!heap.empty()) {
    leaves.push_back(heap.top());
    heap.pop();
  }
  std::sort(leaves.begin(), leaves.end(),
            [](const auto &x, const auto &y) { return x.a < y.a; });
  for (const auto &s : leaves) {
    value += s.est.value;
    error += s.est.error;
  }
  if (!(error <= abs_tol))
    throw NumericError("quadrature did not converge: error estimate " +
                       std::to_string(static_cast<double>(error)) +
                       " exceeds tolerance " +
                       std::to_string(static_cast<double>(abs_tol)));
  return {value, error, count};
}

/// Iterated adaptive integration over the rectangle [ax, bx] x [ay, by].
/// The inner integral runs at a tolerance scaled to the outer width.
template <typename Scalar = double, typename F>
Estimate<Scalar> integrate2d(F &&f, Scalar ax, Scalar bx, Scalar ay, Scalar by,
                             Scalar abs_tol,
                             std::span<const Scalar> breaks_x = {},
                             std::span<const Scalar> breaks_y = {}) {
  const Scalar inner_tol = abs_tol / (4 * std::max<Scalar>(bx - ax, 1));
  auto inner = [&](Scalar x) {
    return integrate<Scalar>([&](Scalar y) { return f(x, y); }, ay, by,
                             inner_tol, breaks_y)
        .value;
  };
  return integrate<Scalar>(inner, ax, bx, abs_tol / 2, breaks_x);
}

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton iteration on P_n).
template <typename Scalar = double>
std::pair<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>,
          Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>
gauss_legendre(int n) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> nodes(n), weights(n);
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    long double x = std::cos(pi * (i + 0.75L) / (n + 0.5L));
    long double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      long double p0 = 1, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
      const long double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-19L) break;
    }
    if (n == 1) {
      nodes(0) = 0;
      weights(0) = 2;
      break;
    }
    const long double w = 2 / ((1 - x * x) * dp * dp);
    nodes(i) = Scalar(-x);
    nodes(n - 1 - i) = Scalar(x);
    weights(i) = weights(n - 1 - i) = Scalar(w);
  }
  return {nodes, weights};
}

}  // namespace rotkde::quad
