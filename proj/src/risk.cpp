#include "rotkde/risk.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "rotkde/error.hpp"
#include "rotkde/parallel.hpp"
#include "rotkde/random.hpp"

namespace rotkde {

double oracle_bandwidth(double n, double mu, double beta) {
  if (!(mu >= 1) || !(mu <= n))
    throw std::invalid_argument(fmt::format("oracle mu must lie in [1, n], got {}", mu));
  return std::pow(mu / n, 1.0 / (2.0 * beta + 1.0));
}

double oracle_estimate(const Points &points, const Point &x, const Model &m, double mu,
                       const Kernel &k, double beta) {
  const double h = oracle_bandwidth(static_cast<double>(points.rows()), mu, beta);
  return product_estimate(points, x, h, m.rotation(), k);
}

double isotropic_bandwidth(double n, double beta) {
  return std::pow(n, -1.0 / (2.0 * beta + 2.0));
}

double isotropic_baseline(const Points &points, const Point &x, double h, const Kernel &k) {
  return isotropic_estimate(points, x, h, k);
}

EstimatorSpec::Kind EstimatorSpec::parse_kind(const std::string &name) {
  if (name == "exact") return Kind::exact;
  if (name == "oracle") return Kind::oracle;
  if (name == "isotropic") return Kind::isotropic;
  if (name == "adaptive") return Kind::adaptive;
  if (name == "minimax") return Kind::minimax;
  throw std::invalid_argument("unknown estimator kind '" + name + "'");
}

std::string EstimatorSpec::kind_name(Kind kind) {
  switch (kind) {
    case Kind::exact: return "exact";
    case Kind::oracle: return "oracle";
    case Kind::isotropic: return "isotropic";
    case Kind::adaptive: return "adaptive";
    case Kind::minimax: return "minimax";
  }
  return "unknown";
}

std::string EstimatorSpec::id() const {
  std::string s = kind_name(kind);
  if (order) s += fmt::format("-m{}", *order);
  switch (kind) {
    case Kind::oracle:
      if (mu) s += fmt::format("-mu{}", *mu);
      break;
    case Kind::isotropic:
      if (bandwidth) s += fmt::format("-h{}", *bandwidth);
      break;
    case Kind::adaptive:
      s += a_value ? fmt::format("-A{}", *a_value) : fmt::format("-a{}", a_mult);
      break;
    case Kind::minimax:
      s += b_value ? fmt::format("-B{}", *b_value) : fmt::format("-b{}", b_mult);
      if (no_split) s += "-nosplit";
      break;
    case Kind::exact: break;
  }
  return s;
}

int default_kernel_order(double beta) {
  return std::max(1, static_cast<int>(std::floor(beta)));
}

RotationNet estimator_net(const EstimatorSpec &spec) {
  if (spec.net_angles.empty()) return RotationNet::uniform(spec.delta);
  std::vector<Rotation> members;
  for (double a : spec.net_angles) members.push_back(Rotation::from_angle(a));
  return RotationNet::from_members(spec.delta, std::move(members));
}

double evaluate_estimator(const EstimatorSpec &spec, const Points &points, const Point &x,
                          const Model &m, const Kernel &k, double p) {
  const double n = static_cast<double>(points.rows());
  switch (spec.kind) {
    case EstimatorSpec::Kind::exact:
      return m.density(x);
    case EstimatorSpec::Kind::oracle:
      return oracle_estimate(points, x, m, spec.mu.value_or(std::log(n)), k, m.beta());
    case EstimatorSpec::Kind::isotropic:
      return isotropic_baseline(points, x,
                                spec.bandwidth.value_or(isotropic_bandwidth(n, m.beta())), k);
    case EstimatorSpec::Kind::adaptive: {
      AdaptiveOptions o;
      o.a_mult = spec.a_mult;
      o.a_value = spec.a_value;
      o.p = p;
      return adaptive_select(points, x, estimator_net(spec), k, o).estimate;
    }
    case EstimatorSpec::Kind::minimax: {
      MinimaxOptions o;
      o.beta = m.beta();
      o.L = m.L();
      o.b_mult = spec.b_mult;
      o.b_value = spec.b_value;
      o.p = p;
      o.no_split = spec.no_split;
      o.stage0.a_mult = spec.a_mult;
      o.stage0.a_value = spec.a_value;
      return minimax_select(points, x, estimator_net(spec), k, o).estimate;
    }
  }
  throw std::invalid_argument("unknown estimator kind");
}

namespace {

template <typename Body>
void replicate(int reps, unsigned threads, Body &&body) {
  parallel_for(static_cast<std::size_t>(reps), threads, [&](std::size_t r) {
    try {
      body(r);
    } catch (const NumericError &e) {
      throw NumericError(fmt::format("replication {}: {}", r, e.what()), e.where());
    } catch (const std::invalid_argument &e) {
      throw std::invalid_argument(fmt::format("replication {}: {}", r, e.what()));
    }
  });
}

}  // namespace

RiskPoint pointwise_risk(const Model &m, const EstimatorSpec &spec, const Point &x, long n,
                         double p, int reps, std::uint64_t seed, unsigned threads) {
  if (reps < 2) throw std::invalid_argument("pointwise_risk needs reps >= 2");
  if (!(p >= 1)) throw std::invalid_argument("risk order p must be >= 1");
  if (n < 1) throw std::invalid_argument("sample size must be positive");
  const Kernel k(spec.order.value_or(default_kernel_order(m.beta())));
  const double truth = m.density(x);
  std::vector<double> powered(static_cast<std::size_t>(reps));
  replicate(reps, threads, [&](std::size_t r) {
    const Sample s = sample(m, n, split_seed(seed, r));
    const double e = evaluate_estimator(spec, s.points, x, m, k, p) - truth;
    if (!std::isfinite(e)) throw NumericError("non-finite estimate", "pointwise_risk");
    powered[r] = std::pow(std::abs(e), p);
  });
  double mean = 0;
  for (double v : powered) mean += v;
  mean /= reps;
  double var = 0;
  for (double v : powered) var += (v - mean) * (v - mean);
  var /= reps - 1;
  RiskPoint out;
  out.n = n;
  out.reps = reps;
  out.risk = std::pow(mean, 1.0 / p);
  out.stderr_ = mean > 0 ? (1.0 / p) * std::pow(mean, 1.0 / p - 1.0) * std::sqrt(var / reps) : 0.0;
  return out;
}

std::uint64_t rate_seed(std::uint64_t seed, long n) {
  return split_seed(seed, static_cast<std::uint64_t>(n));
}

SlopeFit ols_slope(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 3)
    throw std::invalid_argument("slope fit needs at least 3 points");
  const double k = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= k;
  my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0)) throw std::invalid_argument("slope fit needs distinct x values");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double res = y[i] - fit.intercept - fit.slope * x[i];
    rss += res * res;
  }
  fit.slope_stderr = std::sqrt(rss / (k - 2) / sxx);
  return fit;
}

RiskReport rate_study(const Model &m, const EstimatorSpec &spec, const Point &x,
                      const std::vector<long> &n_grid, double p, int reps, std::uint64_t seed,
                      unsigned threads) {
  if (n_grid.size() < 3) throw std::invalid_argument("rate study needs at least 3 sample sizes");
  RiskReport report;
  report.n_grid = n_grid;
  report.reps = reps;
  report.seed = seed;
  report.estimator_id = spec.id();
  std::vector<double> lx, ly;
  for (long n : n_grid) {
    report.risks.push_back(pointwise_risk(m, spec, x, n, p, reps, rate_seed(seed, n), threads));
    const double r = report.risks.back().risk;
    if (!(r > 0)) report.degenerate = true;
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(r));
  }
  if (report.degenerate) {
    report.slope = report.slope_stderr = std::numeric_limits<double>::quiet_NaN();
  } else {
    const SlopeFit fit = ols_slope(lx, ly);
    report.slope = fit.slope;
    report.slope_stderr = fit.slope_stderr;
  }
  return report;
}

std::optional<std::size_t> true_net_index(const Model &m, const RotationNet &net) {
  const double quarter = std::numbers::pi / 2;
  const double t = std::fmod(m.rotation().theta(), quarter);
  for (std::size_t i = 0; i < net.size(); ++i) {
    const double diff = std::abs(std::fmod(net[i].theta(), quarter) - t);
    if (std::min(diff, quarter - diff) <= 1e-9) return i;
  }
  return std::nullopt;
}

namespace {

std::size_t checked_true_index(const Model &m, const RotationNet &net) {
  if (m.rotation_invariant())
    throw std::invalid_argument("selection studies exclude rotation-invariant models");
  const auto idx = true_net_index(m, net);
  if (!idx)
    throw std::invalid_argument("the model's rotation is not a member of the net (mod pi/2)");
  return *idx;
}

}  // namespace

double selection_frequency(const Model &m, const RotationNet &net, const Point &x, long n,
                           int reps, std::uint64_t seed, const Kernel &k,
                           const AdaptiveOptions &options, unsigned threads) {
  const std::size_t truth = checked_true_index(m, net);
  if (reps < 1) throw std::invalid_argument("selection_frequency needs reps >= 1");
  std::vector<char> hit(static_cast<std::size_t>(reps), 0);
  replicate(reps, threads, [&](std::size_t r) {
    const Sample s = sample(m, n, split_seed(seed, r));
    hit[r] = adaptive_select(s.points, x, net, k, options).q_index == truth;
  });
  return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) / reps;
}

double false_rejection_rate(const Model &m, const RotationNet &net, const Point &x, long n,
                            int reps, std::uint64_t seed, const Kernel &k,
                            const AdaptiveOptions &options, unsigned threads) {
  const std::size_t truth = checked_true_index(m, net);
  if (reps < 1) throw std::invalid_argument("false_rejection_rate needs reps >= 1");
  std::vector<char> rejected(static_cast<std::size_t>(reps), 0);
  replicate(reps, threads, [&](std::size_t r) {
    const Sample s = sample(m, n, split_seed(seed, r));
    rejected[r] = adaptive_select(s.points, x, net, k, options).r_surface(truth, 0) > 0.0;
  });
  return static_cast<double>(std::count(rejected.begin(), rejected.end(), 1)) / reps;
}

Calibration calibrate_a_mult(const Model &m, const RotationNet &net, const Point &x, long n,
                             int reps, std::uint64_t seed, const Kernel &k,
                             const std::vector<double> &candidates, double target,
                             AdaptiveOptions options, unsigned threads) {
  if (candidates.empty()) throw std::invalid_argument("no a_mult candidates");
  Calibration c;
  options.a_value.reset();
  for (double a : candidates) {
    options.a_mult = a;
    const double rate = false_rejection_rate(m, net, x, n, reps, seed, k, options, threads);
    c.tried.push_back(a);
    c.rates.push_back(rate);
    if (rate <= target) {
      c.a_mult = a;
      c.rejection_rate = rate;
      return c;
    }
  }
  throw NumericError(
      fmt::format("no a_mult candidate reaches false-rejection rate <= {}", target),
      "calibrate_a_mult");
}

}  // namespace rotkde
