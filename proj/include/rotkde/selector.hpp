#pragma once

#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "rotkde/estimator.hpp"
#include "rotkde/kernel.hpp"
#include "rotkde/model.hpp"
#include "rotkde/rotation.hpp"

namespace rotkde {

/// U_hat = sup over eta in mH, D in net, b in {d, d_perp} of
/// max(1, (n^-1 sum |K_eta(b^T(X_k - x))|)^2).
double u_hat(const Points &points, const Point &x, const RotationNet &net,
             const BandwidthGrid &grid, const Kernel &k);

/// C(K, b, s) memoized per (order, b, s); the quadrature is the slow part of A and B.
double cached_capacity_constant(const Kernel &k, double b, double s);

/// alpha = max(1, max(1, capacity) / ln n), evaluated at a single n.
double default_alpha(double capacity, double n);

/// A = 12 sqrt(10 p alpha) (1 + sqrt(5 p)) max(1, sup_norm) + 4 c_value.
double constant_A(double p, double alpha, double sup_norm, double c_value);
/// Same with sup_norm = ||K||_inf and c_value = C(K, b, sqrt 2).
double constant_A(double p, double alpha, const Kernel &k, double b);

/// C(beta) = max(1, sup_{n >= 3} (ln^2 n / n)^{2beta/(2beta+1)} (ln n)^{2/(2beta+1)}).
double c_beta(double beta);

/// B = 527730 p^2 sqrt 6 norms_max_sq (9 + 4 alpha)^{(3beta+3)/(2beta+1)}
///     cb^{3/2} L^{(4beta+8)/(2beta+1)} + 8 c_value L^2,
/// norms_max_sq = max(||K||_1^2, ||K||_2^2, ||K||_inf^2).
double constant_B(double p, double alpha, double beta, double L, double norms_max_sq,
                  double cb, double c_value);
/// Same with the kernel's norms, C(beta) and C(K, beta, sqrt 2) (mb = beta).
double constant_B(double p, double alpha, double beta, double L, const Kernel &k);

/// ell_0 = ln n, ell_i = ln ell_{i-1}, omega_i = max(ell_i, 4) + capacity and
/// i_star = first i >= 1 with ell_i <= 4. ell has i_star + 1 entries; omega[0]
/// is unused.
struct SplitRecursion {
  std::vector<double> ell;
  std::vector<double> omega;
  int i_star{1};
};

/// Plan-only recursion (accepts n far beyond any sample size).
SplitRecursion split_recursion(long double n, double capacity);

struct SplitPlan {
  long n{0};
  SplitRecursion recursion;
  /// Chunk sizes n_0 = floor(n/4), n_i = floor(n/ell_i), n_{i*} = n - N_{i*-1}.
  std::vector<long> sizes;
  /// Cumulative boundaries N_0 = floor(n/4), N_i = N_{i-1} + n_i.
  std::vector<long> boundaries;
  /// Zero-based half-open index ranges of X^(0), ..., X^(i*).
  std::vector<std::pair<long, long>> chunks;
};

SplitPlan split_plan(long n, double capacity);
inline SplitPlan split_plan(long n, const RotationNet &net) {
  return split_plan(n, net.capacity());
}

struct AdaptiveOptions {
  /// Multiplier on the theoretical A; 1 gives the unscaled rule.
  double a_mult{1.0};
  double p{2.0};
  /// Defaults to default_alpha(capacity, n).
  std::optional<double> alpha;
  /// Smoothness index mb of C(K, mb, sqrt 2); defaults to max(1, order_floor).
  std::optional<double> mb;
  /// Replaces a_mult * A entirely (fixed penalty level for tests and loops).
  std::optional<double> a_value;
  UStatMode mode{UStatMode::pruned};
  unsigned threads{1};
};

struct SelectionResult {
  double h_hat{0};
  Rotation q_hat;
  std::size_t q_index{0};
  std::size_t h_index{0};
  double estimate{0};
  double u_hat{1};
  /// Effective penalty constant (a_mult * A or the injected value).
  double a_value{0};
  /// Bandwidths of the search grid (mH, decreasing); columns of the tables.
  std::vector<double> bandwidths;
  /// R_n(Q, h): rows index the net, columns the bandwidths.
  Eigen::MatrixXd r_surface;
  /// R_n(Q, h) + A U_hat sqrt(ln n / (n h)).
  Eigen::MatrixXd criterion;
  long combined_evaluations{0};
  long product_evaluations{0};
};

SelectionResult adaptive_select(const Points &points, const Point &x, const RotationNet &net,
                                const Kernel &k, const AdaptiveOptions &options = {});
/// Explicit search grid (bypasses the n-based grid and its minimum n).
SelectionResult adaptive_select(const Points &points, const Point &x, const RotationNet &net,
                                const Kernel &k, const BandwidthGrid &grid,
                                const AdaptiveOptions &options = {});

struct MinimaxOptions {
  double beta{2.0};
  double L{1.0};
  /// Multiplier on the theoretical B.
  double b_mult{1.0};
  double p{2.0};
  std::optional<double> alpha;
  /// Replaces b_mult * B entirely.
  std::optional<double> b_value;
  /// Stage i >= 1 uses the full sample instead of its chunk.
  bool no_split{false};
  /// Stage-0 adaptive options; its mb is forced to beta.
  AdaptiveOptions stage0;
};

struct MinimaxStage {
  int index{0};
  double h{0};
  double omega{0};
  long n{0};
  /// R^(i)(Q) per net member.
  Eigen::VectorXd r_values;
  std::size_t q_index{0};
  Rotation q_hat;
  /// f^(i) = product estimate at (h_i, Q_hat^(i)) on the stage data.
  double candidate{0};
  bool accepted{false};
  /// f-breve^(i) after the stage.
  double estimate{0};
};

struct MinimaxResult {
  double estimate{0};
  double b_value{0};
  SplitPlan plan;
  SelectionResult stage0;
  std::vector<MinimaxStage> stages;
};

/// Smallest n accepted by minimax_select (stage 0 runs adaptive_select on n/4 points).
inline constexpr long kMinimaxMinimumN = 64;

MinimaxResult minimax_select(const Points &points, const Point &x, const RotationNet &net,
                             const Kernel &k, const MinimaxOptions &options = {});

}  // namespace rotkde
