#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "rotkde/model.hpp"
#include "rotkde/selector.hpp"

using namespace rotkde;

namespace {

constexpr double kDeg = std::numbers::pi / 180;

const Model &anisotropic() {
  static const Model m(Marginal::gaussian(1.0), Marginal::gaussian(1.6),
                       Rotation::from_angle(30 * kDeg), 2.0, 1.0, "aniso");
  return m;
}

RotationNet net_of(std::initializer_list<double> degrees, double delta = 0.2) {
  std::vector<Rotation> members;
  for (double d : degrees) members.push_back(Rotation::from_angle(d * kDeg));
  return RotationNet::from_members(delta, members);
}

}  // namespace

TEST_CASE("u_hat clamps at one and matches a hand evaluation") {
  const Kernel k(1);
  Points far(3, 2);
  far << 50, 50, 60, -40, -70, 55;
  const BandwidthGrid grid(1000);
  CHECK(u_hat(far, Point(0, 0), RotationNet::uniform(0.3), grid, k) == 1.0);

  // Three points close together: the |K| average exceeds one.
  Points p(3, 2);
  p << 0.01, 0.02, -0.02, 0.01, 0.0, -0.01;
  const double h = 0.05;
  const auto g = BandwidthGrid::from_values(3, {h}, {h});
  const RotationNet single = net_of({0});
  auto kh = [&](double t) { return std::abs(9.0 / 8 - 15.0 / 8 * (t / h) * (t / h)) / h; };
  const double a1 = (kh(0.01) + kh(-0.02) + kh(0.0)) / 3;   // d = (1, 0)
  const double a2 = (kh(0.02) + kh(0.01) + kh(-0.01)) / 3;  // d_perp = (0, 1)
  const double expected = std::max({1.0, a1 * a1, a2 * a2});
  CHECK(expected > 1.0);
  CHECK(u_hat(p, Point(0, 0), single, g, k) == doctest::Approx(expected).epsilon(1e-13));

  std::mt19937_64 gen(1);
  for (int i = 0; i < 5; ++i) {
    const Sample s = sample(anisotropic(), 200, gen());
    CHECK(u_hat(s.points, Point(0, 0), RotationNet::uniform(0.3), BandwidthGrid(200), k) >= 1.0);
  }
}

TEST_CASE("constant A: injected values, monotonicity, quadrature recomputation") {
  CHECK(constant_A(1, 1, 1, 0) == doctest::Approx(12 * std::sqrt(10.0) * (1 + std::sqrt(5.0))).epsilon(1e-15));
  // The commonly quoted 122.797 is a rounding of 122.80015.
  CHECK(constant_A(1, 1, 1, 0) == doctest::Approx(122.80015).epsilon(1e-6));
  CHECK(constant_A(1, 1, 1, 0) == doctest::Approx(122.797).epsilon(1e-4));
  CHECK(constant_A(2, 1, 1, 0) > constant_A(1, 1, 1, 0));
  const Kernel k(1);
  CHECK(constant_A(2, 1, k, 1.0) > constant_A(1, 1, k, 1.0));
  const double c = oracle::capacity_constant(k, 1.0, std::sqrt(2.0));
  const double expected = oracle::constant_A(2, 1, k.sup_norm(), c);
  CHECK(std::abs(constant_A(2, 1, k, 1.0) - expected) <= 1e-6 * expected);
  CHECK_THROWS_AS(constant_A(0.5, 1, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(constant_A(1, 0.5, 1, 0), std::invalid_argument);
}

TEST_CASE("C(beta)") {
  CHECK(c_beta(2.0) == 1.0);
  CHECK(c_beta(0.3) == doctest::Approx(oracle::c_beta_scan(0.3)).epsilon(1e-12));
  // Maximizer ln n = (2 beta + 1)/beta = 22 lies beyond 1e6: closed form t^2 e^-2.
  CHECK(c_beta(0.05) == doctest::Approx(22.0 * 22.0 * std::exp(-2.0)).epsilon(1e-12));
}

TEST_CASE("constant B: injected values, monotonicity, recomputation") {
  const double injected = constant_B(1, 1, 1, 1, 1, 1, 0);
  CHECK(injected == doctest::Approx(527730 * std::sqrt(6.0) * 169).epsilon(1e-14));
  CHECK(injected == doctest::Approx(2.184612e8).epsilon(1e-6));
  CHECK(injected == doctest::Approx(2.1848e8).epsilon(1e-3));
  CHECK(constant_B(1, 1, 1, 2, 1, 1, 0.5) > constant_B(1, 1, 1, 1, 1, 1, 0.5));
  const Kernel k(2);
  CHECK(constant_B(2, 1, 2, 2, k) > constant_B(2, 1, 2, 1, k));
  const double norms = std::max({k.l1_norm() * k.l1_norm(), k.l2_norm_sq(), k.sup_norm() * k.sup_norm()});
  const double expected = oracle::constant_B(2, 1.3, 2, 1.5, norms, oracle::c_beta_scan(2),
                                             oracle::capacity_constant(k, 2, std::sqrt(2.0)));
  CHECK(std::abs(constant_B(2, 1.3, 2, 1.5, k) - expected) <= 1e-6 * expected);
}

TEST_CASE("split plan examples") {
  const SplitPlan plan = split_plan(1000000, std::log(3.0));
  CHECK(plan.recursion.ell[0] == doctest::Approx(13.8155).epsilon(1e-5));
  CHECK(plan.recursion.ell[1] == doctest::Approx(2.6258).epsilon(1e-4));
  CHECK(plan.recursion.i_star == 1);
  CHECK(plan.recursion.omega[1] == doctest::Approx(4 + std::log(3.0)));
  REQUIRE(plan.chunks.size() == 2);
  CHECK(plan.boundaries[0] == 250000);
  CHECK(plan.chunks[0] == std::pair<long, long>(0, 250000));
  CHECK(plan.chunks[1] == std::pair<long, long>(250000, 1000000));

  const SplitRecursion big = split_recursion(1e30L, 2.0);
  CHECK(big.ell[1] == doctest::Approx(4.235).epsilon(1e-3));
  CHECK(big.ell[2] == doctest::Approx(1.443).epsilon(1e-3));
  CHECK(big.i_star == 2);
  CHECK(big.omega[1] == doctest::Approx(big.ell[1] + 2.0));
  CHECK(big.omega[2] == doctest::Approx(6.0));
  // i* = 1 whenever ln ln n <= 4.
  CHECK(split_recursion(5e23L, 0).i_star == 1);
  CHECK(split_recursion(1e24L, 0).i_star == 2);
}

TEST_CASE("split plans partition the sample") {
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<long> n_dist(16, 5000000);
  for (int i = 0; i < 50; ++i) {
    const long n = n_dist(gen);
    const SplitPlan p = split_plan(n, 1.5);
    long expect = 0;
    for (const auto &[a, b] : p.chunks) {
      CHECK(a == expect);
      CHECK(b > a);
      expect = b;
    }
    CHECK(expect == n);
    CHECK(p.chunks[0].second == n / 4);
    CHECK(4 * p.chunks[p.recursion.i_star - 1].second < 3 * n);
  }
}

TEST_CASE("adaptive selection invariants") {
  const Sample s = sample(anisotropic(), 500, 7);
  const RotationNet net = RotationNet::uniform(0.5);
  const Kernel k(1);
  AdaptiveOptions o;
  o.a_mult = 0.01;
  const SelectionResult r = adaptive_select(s.points, Point(0, 0), net, k, o);
  const BandwidthGrid grid(500);
  const auto m = static_cast<long>(grid.restricted().size());
  const auto q = static_cast<long>(net.size());
  CHECK(r.combined_evaluations == m * q * q);
  CHECK(r.product_evaluations == m * q);
  CHECK((r.r_surface.array() >= 0).all());
  for (long qi = 0; qi < q; ++qi)
    for (long j = 1; j < m; ++j) CHECK(r.r_surface(qi, j) <= r.r_surface(qi, j - 1));
  CHECK(r.criterion.minCoeff() == r.criterion(r.q_index, r.h_index));
  CHECK(r.estimate == product_estimate(s.points, Point(0, 0), r.h_hat, r.q_hat, k));
  CHECK(std::find(grid.restricted().begin(), grid.restricted().end(), r.h_hat) != grid.restricted().end());
  const SelectionResult again = adaptive_select(s.points, Point(0, 0), net, k, o);
  CHECK(again.estimate == r.estimate);
  CHECK((again.criterion.array() == r.criterion.array()).all());
  // The theoretical A is reported.
  CHECK(r.a_value == doctest::Approx(0.01 * constant_A(2, default_alpha(net.capacity(), 500), k, 1.0)));
}

TEST_CASE("adaptive selection: singleton net, ties and threads") {
  const Sample s = sample(anisotropic(), 400, 3);
  const Kernel k(1);
  const RotationNet single = net_of({30});
  const SelectionResult r = adaptive_select(s.points, Point(0, 0), single, k);
  CHECK(r.q_index == 0);
  CHECK(r.q_hat.theta() == doctest::Approx(30 * kDeg));

  // A huge penalty zeroes R, so the criterion is the penalty alone: the largest
  // bandwidth and the first net member win.
  AdaptiveOptions big;
  big.a_value = 1e9;
  const SelectionResult z = adaptive_select(s.points, Point(0, 0), RotationNet::uniform(0.3), k, big);
  CHECK(z.r_surface.isZero(0));
  CHECK(z.q_index == 0);
  CHECK(z.h_index == 0);

  AdaptiveOptions threaded;
  threaded.a_mult = 0.05;
  threaded.threads = 4;
  AdaptiveOptions serial = threaded;
  serial.threads = 1;
  const RotationNet net = RotationNet::uniform(0.3);
  const SelectionResult a = adaptive_select(s.points, Point(0.1, 0), net, k, threaded);
  const SelectionResult b = adaptive_select(s.points, Point(0.1, 0), net, k, serial);
  CHECK((a.r_surface.array() == b.r_surface.array()).all());
  CHECK(a.estimate == b.estimate);
}

TEST_CASE("adaptive R-surface on a hand-computed 3-point sample") {
  Points p(3, 2);
  p << 0.1, 0.2, -0.3, 0.05, 0.2, -0.15;
  const Kernel k(1);
  const std::vector<double> hs{0.8, 0.5, 0.3};
  const auto grid = BandwidthGrid::from_values(3, hs, hs);
  const RotationNet single = net_of({0});
  AdaptiveOptions o;
  o.a_value = 0.02;
  const SelectionResult r = adaptive_select(p, Point(0, 0), single, k, grid, o);

  auto avg = [&](int c, double h) {
    double s = 0;
    for (int i = 0; i < 3; ++i) {
      const double t = p(i, c) / h;
      s += std::abs(t) <= 1 ? (9.0 / 8 - 15.0 / 8 * t * t) / h : 0.0;
    }
    return s / 3;
  };
  auto absavg = [&](int c, double h) {
    double s = 0;
    for (int i = 0; i < 3; ++i) {
      const double t = p(i, c) / h;
      s += std::abs(t) <= 1 ? std::abs(9.0 / 8 - 15.0 / 8 * t * t) / h : 0.0;
    }
    return s / 3;
  };
  double u = 1;
  for (double h : hs) u = std::max({u, absavg(0, h) * absavg(0, h), absavg(1, h) * absavg(1, h)});
  CHECK(r.u_hat == doctest::Approx(u).epsilon(1e-13));
  auto f = [&](double h) { return avg(0, h) * avg(1, h); };
  auto pen = [&](double h) { return 0.02 * u * std::sqrt(std::log(3.0) / (3 * h)); };
  for (std::size_t j = 0; j < hs.size(); ++j) {
    double expected = 0;
    for (std::size_t i = j; i < hs.size(); ++i)
      for (std::size_t ip = i; ip < hs.size(); ++ip)
        expected = std::max(expected, std::abs(f(hs[i]) - f(hs[ip])) - pen(hs[ip]));
    CHECK(r.r_surface(0, j) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r.criterion(0, j) == doctest::Approx(expected + pen(hs[j])).epsilon(1e-12));
  }
}

TEST_CASE("minimax selection branches") {
  const Model &m = anisotropic();
  const Sample s = sample(m, 2000, 21);
  const Kernel k(2);
  const RotationNet net = RotationNet::uniform(0.5);
  const Point x(0, 0);
  MinimaxOptions o;
  o.stage0.a_mult = 0.02;

  SUBCASE("clamp saturates: first net member, no fallback") {
    o.b_mult = 1e6;
    const MinimaxResult r = minimax_select(s.points, x, net, k, o);
    REQUIRE(r.stages.size() == 1);
    const MinimaxStage &st = r.stages[0];
    CHECK(st.r_values.isZero(0));
    CHECK(st.q_index == 0);
    CHECK(st.accepted);
    const auto [a, b] = r.plan.chunks[1];
    const Points chunk = s.points.middleRows(a, b - a);
    CHECK(r.estimate == product_estimate(chunk, x, st.h, net[0], k));
    const double h1 = std::pow(r.plan.recursion.omega[1] / static_cast<double>(b - a), 1.0 / 5);
    CHECK(st.h == doctest::Approx(h1));
  }
  SUBCASE("tiny threshold: falls back to the stage-0 adaptive estimate") {
    o.b_value = 1e-12;
    const MinimaxResult r = minimax_select(s.points, x, net, k, o);
    CHECK_FALSE(r.stages[0].accepted);
    CHECK(r.stages[0].r_values.minCoeff() > 0);
    CHECK(r.estimate == r.stage0.estimate);
    const Points x0 = s.points.topRows(500);
    AdaptiveOptions a0 = o.stage0;
    a0.mb = 2.0;
    CHECK(r.stage0.estimate == adaptive_select(x0, x, net, k, a0).estimate);
  }
  SUBCASE("singleton true net reduces to the fixed-bandwidth oracle on the last chunk") {
    const RotationNet truth = net_of({30});
    const MinimaxResult r = minimax_select(s.points, x, truth, k, o);
    CHECK(r.stages[0].accepted);
    const auto [a, b] = r.plan.chunks[1];
    CHECK(r.estimate == product_estimate(Points(s.points.middleRows(a, b - a)), x, r.stages[0].h,
                                         m.rotation(), k));
  }
  SUBCASE("no-split uses the full sample for stage 1") {
    o.b_mult = 1e6;
    o.no_split = true;
    const MinimaxResult r = minimax_select(s.points, x, net, k, o);
    CHECK(r.stages[0].n == 2000);
    CHECK(r.estimate == product_estimate(s.points, x, r.stages[0].h, net[0], k));
  }
  SUBCASE("too few points") {
    CHECK_THROWS_AS(minimax_select(Points(s.points.topRows(63)), x, net, k, o), std::invalid_argument);
  }
}
