#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rotkde/estimator.hpp"
#include "rotkde/kernel.hpp"
#include "rotkde/model.hpp"
#include "rotkde/rotation.hpp"
#include "rotkde/selector.hpp"

namespace rotkde {

/// Known-rotation oracle: product estimate with D = Q_f at h = (mu/n)^{1/(2beta+1)}.
double oracle_bandwidth(double n, double mu, double beta);
double oracle_estimate(const Points &points, const Point &x, const Model &m, double mu,
                       const Kernel &k, double beta);

/// Default isotropic bandwidth n^{-1/(2beta+2)}.
double isotropic_bandwidth(double n, double beta);
/// n^-1 sum K_h(X_k1 - x1) K_h(X_k2 - x2).
double isotropic_baseline(const Points &points, const Point &x, double h, const Kernel &k);

/// Which estimator a Monte Carlo study evaluates, with its parameters.
struct EstimatorSpec {
  enum class Kind { exact, oracle, isotropic, adaptive, minimax };

  Kind kind{Kind::oracle};
  /// Kernel order_floor; defaults to floor(beta) of the model.
  std::optional<int> order;
  /// Oracle: mu, defaults to ln n.
  std::optional<double> mu;
  /// Isotropic: bandwidth, defaults to isotropic_bandwidth(n, beta).
  std::optional<double> bandwidth;
  /// Adaptive and minimax: delta of the uniform net, or explicit angles (radians).
  double delta{0.5};
  std::vector<double> net_angles;
  double a_mult{1.0};
  std::optional<double> a_value;
  double b_mult{1.0};
  std::optional<double> b_value;
  bool no_split{false};

  std::string id() const;
  static Kind parse_kind(const std::string &name);
  static std::string kind_name(Kind kind);
};

int default_kernel_order(double beta);
RotationNet estimator_net(const EstimatorSpec &spec);

/// Evaluates `spec` on one sample; p is the risk order used by the selection rules.
double evaluate_estimator(const EstimatorSpec &spec, const Points &points, const Point &x,
                          const Model &m, const Kernel &k, double p);

struct RiskPoint {
  long n{0};
  double risk{0};
  double stderr_{0};
  int reps{0};
};

/// (mean |e|^p)^{1/p} over reps samples with seeds split_seed(seed, r); the
/// standard error is by the delta method on the p-th moment.
RiskPoint pointwise_risk(const Model &m, const EstimatorSpec &spec, const Point &x, long n,
                         double p, int reps, std::uint64_t seed, unsigned threads = 1);

/// Seed of the n-th grid point of a rate study.
std::uint64_t rate_seed(std::uint64_t seed, long n);

struct RiskReport {
  std::vector<long> n_grid;
  std::vector<RiskPoint> risks;
  /// NaN when degenerate.
  double slope{0};
  double slope_stderr{0};
  /// Some risk is zero, so the log-log fit is undefined.
  bool degenerate{false};
  int reps{0};
  std::uint64_t seed{0};
  std::string estimator_id;
};

struct SlopeFit {
  double slope{0};
  double intercept{0};
  double slope_stderr{0};
};

/// Ordinary least squares of y on x with the usual slope standard error.
SlopeFit ols_slope(const std::vector<double> &x, const std::vector<double> &y);

RiskReport rate_study(const Model &m, const EstimatorSpec &spec, const Point &x,
                      const std::vector<long> &n_grid, double p, int reps, std::uint64_t seed,
                      unsigned threads = 1);

/// Index of the net member equal to the model's rotation modulo pi/2.
std::optional<std::size_t> true_net_index(const Model &m, const RotationNet &net);

/// Fraction of replications whose adaptive Q_hat equals the true rotation mod pi/2.
double selection_frequency(const Model &m, const RotationNet &net, const Point &x, long n,
                           int reps, std::uint64_t seed, const Kernel &k,
                           const AdaptiveOptions &options, unsigned threads = 1);

/// Fraction of replications with R_n(Q_f, h) > 0 at the largest h of mH (the
/// true rotation loses at least one comparison).
double false_rejection_rate(const Model &m, const RotationNet &net, const Point &x, long n,
                            int reps, std::uint64_t seed, const Kernel &k,
                            const AdaptiveOptions &options, unsigned threads = 1);

struct Calibration {
  double a_mult{0};
  double rejection_rate{0};
  std::vector<double> tried;
  std::vector<double> rates;
};

/// Smallest a_mult among `candidates` (ascending) whose pilot false-rejection
/// rate is <= target; throws NumericError if none qualifies.
Calibration calibrate_a_mult(const Model &m, const RotationNet &net, const Point &x, long n,
                             int reps, std::uint64_t seed, const Kernel &k,
                             const std::vector<double> &candidates, double target = 0.05,
                             AdaptiveOptions options = {}, unsigned threads = 1);

}  // namespace rotkde
