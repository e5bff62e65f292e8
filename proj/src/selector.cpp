#include "rotkde/selector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <tuple>

#include "rotkde/error.hpp"
#include "rotkde/parallel.hpp"

namespace rotkde {

double u_hat(const Points &points, const Point &x, const RotationNet &net,
             const BandwidthGrid &grid, const Kernel &k) {
  if (grid.restricted().empty()) throw std::invalid_argument("restricted grid is empty");
  double best = 1.0;
  for (double eta : grid.restricted()) {
    for (std::size_t j = 0; j < net.size(); ++j) {
      const Rotation &d = net[j];
      for (const Eigen::Vector2d &b : {d.col(), d.col_perp()}) {
        const double avg = directional_abs_kde(points, x, eta, b, k);
        best = std::max(best, avg * avg);
      }
    }
  }
  return best;
}

double cached_capacity_constant(const Kernel &k, double b, double s) {
  static std::mutex mutex;
  static std::map<std::tuple<int, double, double>, double> cache;
  const auto key = std::make_tuple(k.order_floor(), b, s);
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  const double value = capacity_constant(k, b, s);
  std::lock_guard lock(mutex);
  cache.emplace(key, value);
  return value;
}

double default_alpha(double capacity, double n) {
  if (!(n > 1)) throw std::invalid_argument("alpha needs n > 1");
  return std::max(1.0, std::max(1.0, capacity) / std::log(n));
}

double constant_A(double p, double alpha, double sup_norm, double c_value) {
  if (!(p >= 1)) throw std::invalid_argument("constant_A requires p >= 1");
  if (!(alpha >= 1)) throw std::invalid_argument("constant_A requires alpha >= 1");
  return 12.0 * std::sqrt(10.0 * p * alpha) * (1.0 + std::sqrt(5.0 * p)) *
             std::max(1.0, sup_norm) +
         4.0 * c_value;
}

double constant_A(double p, double alpha, const Kernel &k, double b) {
  return constant_A(p, alpha, k.sup_norm(), cached_capacity_constant(k, b, std::sqrt(2.0)));
}

double c_beta(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("C(beta) requires beta > 0");
  // ln of the bracket: 2 ln ln n - (2 beta / (2 beta + 1)) ln n, maximal at
  // ln n = (2 beta + 1) / beta and decreasing beyond.
  const double c = 2.0 * beta / (2.0 * beta + 1.0);
  auto log_term = [c](double t) { return 2.0 * std::log(t) - c * t; };
  double best = -std::numeric_limits<double>::infinity();
  for (long n = 3; n <= 1000000; ++n)
    best = std::max(best, log_term(std::log(static_cast<double>(n))));
  const double t_star = 2.0 / c;
  if (t_star > std::log(1e6)) best = std::max(best, log_term(t_star));
  return std::max(1.0, std::exp(best));
}

double constant_B(double p, double alpha, double beta, double L, double norms_max_sq,
                  double cb, double c_value) {
  if (!(p >= 1)) throw std::invalid_argument("constant_B requires p >= 1");
  if (!(alpha >= 1)) throw std::invalid_argument("constant_B requires alpha >= 1");
  if (!(beta > 0)) throw std::invalid_argument("constant_B requires beta > 0");
  if (!(L > 0)) throw std::invalid_argument("constant_B requires L > 0");
  const double d = 2.0 * beta + 1.0;
  return 527730.0 * p * p * std::sqrt(6.0) * norms_max_sq *
             std::pow(9.0 + 4.0 * alpha, (3.0 * beta + 3.0) / d) * std::pow(cb, 1.5) *
             std::pow(L, (4.0 * beta + 8.0) / d) +
         8.0 * c_value * L * L;
}

double constant_B(double p, double alpha, double beta, double L, const Kernel &k) {
  const double norms = std::max({k.l1_norm() * k.l1_norm(), k.l2_norm_sq(),
                                 k.sup_norm() * k.sup_norm()});
  return constant_B(p, alpha, beta, L, norms, c_beta(beta),
                    cached_capacity_constant(k, beta, std::sqrt(2.0)));
}

SplitRecursion split_recursion(long double n, double capacity) {
  if (!(n >= 16)) throw std::invalid_argument("split plan needs n >= 16");
  SplitRecursion r;
  r.ell.push_back(static_cast<double>(std::log(n)));
  r.omega.push_back(std::numeric_limits<double>::quiet_NaN());
  for (int i = 1;; ++i) {
    const double ell = std::log(r.ell.back());
    r.ell.push_back(ell);
    r.omega.push_back(std::max(ell, 4.0) + capacity);
    if (ell <= 4.0) {
      r.i_star = i;
      return r;
    }
  }
}

SplitPlan split_plan(long n, double capacity) {
  SplitPlan plan;
  plan.n = n;
  plan.recursion = split_recursion(static_cast<long double>(n), capacity);
  const int i_star = plan.recursion.i_star;
  const long n0 = n / 4;
  plan.sizes.push_back(n0);
  plan.boundaries.push_back(n0);
  plan.chunks.emplace_back(0, n0);
  for (int i = 1; i <= i_star; ++i) {
    const long prev = plan.boundaries.back();
    const long size =
        i < i_star ? static_cast<long>(std::floor(static_cast<double>(n) / plan.recursion.ell[i]))
                   : n - prev;
    if (size <= 0 || prev + size > n)
      throw std::invalid_argument("split plan produced an empty or overflowing chunk for n = " +
                                  std::to_string(n));
    plan.sizes.push_back(size);
    plan.boundaries.push_back(prev + size);
    plan.chunks.emplace_back(prev, prev + size);
  }
  return plan;
}

namespace {

void check_selection_inputs(const Points &points, const RotationNet &net) {
  if (net.size() == 0) throw std::invalid_argument("rotation net is empty");
  if (points.rows() < 2) throw std::invalid_argument("selection needs at least 2 points");
}

}  // namespace

SelectionResult adaptive_select(const Points &points, const Point &x, const RotationNet &net,
                                const Kernel &k, const AdaptiveOptions &options) {
  return adaptive_select(points, x, net, k, BandwidthGrid(points.rows()), options);
}

SelectionResult adaptive_select(const Points &points, const Point &x, const RotationNet &net,
                                const Kernel &k, const BandwidthGrid &grid,
                                const AdaptiveOptions &options) {
  check_selection_inputs(points, net);
  if (grid.restricted().empty()) throw std::invalid_argument("restricted grid is empty");
  if (!(options.a_mult > 0)) throw std::invalid_argument("a_mult must be positive");

  const auto &hs = grid.restricted();
  const std::size_t m = hs.size(), q_count = net.size();
  const double n = static_cast<double>(points.rows());
  const double ln_n = std::log(n);

  SelectionResult result;
  result.bandwidths = hs;
  result.u_hat = u_hat(points, x, net, grid, k);
  if (options.a_value) {
    result.a_value = *options.a_value;
  } else {
    const double alpha = options.alpha.value_or(default_alpha(net.capacity(), n));
    const double mb = options.mb.value_or(std::max(1, k.order_floor()));
    result.a_value = options.a_mult * constant_A(options.p, alpha, k, mb);
  }
  const double level = result.a_value * result.u_hat;
  auto penalty = [&](double h) { return level * std::sqrt(ln_n / (n * h)); };

  // prod(i, D) = f~_{h_i, D};  comb[i](D, Q) = f~_{h_i, (D, Q)}, D = Q reuses prod.
  const PrunedIndex index(points);
  Eigen::MatrixXd prod(m, q_count);
  std::vector<Eigen::MatrixXd> comb(m, Eigen::MatrixXd(q_count, q_count));
  parallel_for(m * q_count, options.threads, [&](std::size_t job) {
    const std::size_t i = job / q_count, d = job % q_count;
    prod(i, d) = product_estimate(points, x, hs[i], net[d], k);
  });
  parallel_for(m * q_count * q_count, options.threads, [&](std::size_t job) {
    const std::size_t i = job / (q_count * q_count), d = (job / q_count) % q_count,
                      q = job % q_count;
    comb[i](d, q) = d == q ? prod(i, d)
                           : auxiliary_estimate(points, x, hs[i], net[d], net[q], k,
                                                options.mode, &index);
  });
  result.product_evaluations = static_cast<long>(m * q_count);
  result.combined_evaluations = static_cast<long>(m * q_count * q_count);

  // T(Q, i) = max over i' >= i (eta' <= eta), D of the clamped difference;
  // R(Q, j) = max over i >= j (eta <= h_j) of T(Q, i).
  result.r_surface.resize(q_count, m);
  result.criterion.resize(q_count, m);
  for (std::size_t q = 0; q < q_count; ++q) {
    double running = 0.0;
    for (std::size_t ii = m; ii-- > 0;) {
      double t = 0.0;
      for (std::size_t ip = ii; ip < m; ++ip) {
        const double pen = penalty(hs[ip]);
        for (std::size_t d = 0; d < q_count; ++d)
          t = std::max(t, std::abs(comb[ii](d, q) - prod(ip, d)) - pen);
      }
      running = std::max(running, t);
      result.r_surface(q, ii) = running;
      result.criterion(q, ii) = running + penalty(hs[ii]);
    }
  }

  // Row-major scan with strict improvement: smallest net index, then largest h.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < q_count; ++q)
    for (std::size_t j = 0; j < m; ++j)
      if (result.criterion(q, j) < best) {
        best = result.criterion(q, j);
        result.q_index = q;
        result.h_index = j;
      }
  if (!std::isfinite(best)) throw NumericError("criterion is not finite", "adaptive_select");
  result.h_hat = hs[result.h_index];
  result.q_hat = net[result.q_index];
  result.estimate = prod(result.h_index, result.q_index);
  return result;
}

MinimaxResult minimax_select(const Points &points, const Point &x, const RotationNet &net,
                             const Kernel &k, const MinimaxOptions &options) {
  check_selection_inputs(points, net);
  const long n = static_cast<long>(points.rows());
  if (n < kMinimaxMinimumN)
    throw std::invalid_argument("minimax_select needs n >= " +
                                std::to_string(kMinimaxMinimumN) + ", got " + std::to_string(n));
  if (!(options.b_mult > 0)) throw std::invalid_argument("b_mult must be positive");
  if (!(options.beta > 0) || !(options.L > 0))
    throw std::invalid_argument("minimax_select requires beta > 0 and L > 0");

  MinimaxResult result;
  result.plan = split_plan(n, net);
  if (options.b_value) {
    result.b_value = *options.b_value;
  } else {
    const double alpha =
        options.alpha.value_or(default_alpha(net.capacity(), static_cast<double>(n)));
    result.b_value = options.b_mult * constant_B(options.p, alpha, options.beta, options.L, k);
  }

  const auto [first0, last0] = result.plan.chunks.front();
  const Points x0 = points.middleRows(first0, last0 - first0);
  if (x0.rows() < BandwidthGrid::kMinimumN)
    throw std::invalid_argument("minimax_select: stage-0 chunk has " +
                                std::to_string(x0.rows()) + " points, below the grid minimum");
  AdaptiveOptions stage0 = options.stage0;
  stage0.p = options.p;
  stage0.mb = options.beta;
  result.stage0 = adaptive_select(x0, x, net, k, stage0);
  double current = result.stage0.estimate;

  const double L = options.L, beta = options.beta;
  const std::size_t q_count = net.size();
  for (int i = 1; i <= result.plan.recursion.i_star; ++i) {
    const auto [first, last] = result.plan.chunks[i];
    const Points chunk = options.no_split ? points : Points(points.middleRows(first, last - first));
    MinimaxStage stage;
    stage.index = i;
    stage.n = static_cast<long>(chunk.rows());
    if (stage.n < 2) throw std::invalid_argument("minimax_select: stage chunk is too small");
    stage.omega = result.plan.recursion.omega[i];
    stage.h = std::pow(std::pow(L, -4.0) * stage.omega / static_cast<double>(stage.n),
                       1.0 / (2.0 * beta + 1.0));
    const double threshold = result.b_value * L * L * std::pow(stage.h, beta);

    const PrunedIndex index(chunk);
    Eigen::VectorXd prod(q_count);
    for (std::size_t d = 0; d < q_count; ++d)
      prod(d) = product_estimate(chunk, x, stage.h, net[d], k);
    Eigen::MatrixXd comb(q_count, q_count);
    parallel_for(q_count * q_count, options.stage0.threads, [&](std::size_t job) {
      const std::size_t d = job / q_count, q = job % q_count;
      comb(d, q) = d == q ? prod(d)
                          : auxiliary_estimate(chunk, x, stage.h, net[d], net[q], k,
                                               options.stage0.mode, &index);
    });
    stage.r_values.resize(q_count);
    for (std::size_t q = 0; q < q_count; ++q) {
      double r = 0.0;
      for (std::size_t d = 0; d < q_count; ++d)
        r = std::max(r, std::abs(comb(d, q) - prod(d)) - threshold);
      stage.r_values(q) = r;
    }
    Eigen::Index best = 0;
    for (Eigen::Index q = 1; q < stage.r_values.size(); ++q)
      if (stage.r_values(q) < stage.r_values(best)) best = q;
    stage.q_index = static_cast<std::size_t>(best);
    stage.q_hat = net[stage.q_index];
    stage.candidate = prod(best);
    stage.accepted = stage.r_values(best) == 0.0;
    if (stage.accepted) current = stage.candidate;
    stage.estimate = current;
    result.stages.push_back(std::move(stage));
  }
  result.estimate = current;
  return result;
}

}  // namespace rotkde
