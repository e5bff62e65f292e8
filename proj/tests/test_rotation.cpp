#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rotkde/rotation.hpp"

using rotkde::Rotation;
using rotkde::RotationNet;

namespace {

constexpr double kDeg = std::numbers::pi / 180;
Rotation deg(double a) { return Rotation::from_angle(a * kDeg); }

}  // namespace

TEST_CASE("rotation from angle") {
  const Rotation id = Rotation::from_angle(0);
  CHECK(id.q1() == 1.0);
  CHECK(id.q2() == 0.0);
  const Rotation quarter = Rotation::from_angle(std::numbers::pi / 2);
  CHECK(std::abs(quarter.q1()) <= 1e-15);
  CHECK(quarter.q2() == doctest::Approx(1.0));
  const Rotation a = Rotation::from_angle(2 * std::numbers::pi + 0.3), b = Rotation::from_angle(0.3);
  CHECK(std::abs(a.q1() - b.q1()) <= 1e-12);
  CHECK(std::abs(a.q2() - b.q2()) <= 1e-12);
  CHECK(a.theta() >= 0.0);
  CHECK(a.theta() < 2 * std::numbers::pi);
  CHECK(Rotation::from_angle(-0.2).theta() == doctest::Approx(2 * std::numbers::pi - 0.2));
  CHECK_THROWS_AS(Rotation::from_angle(std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(Rotation::from_angle(INFINITY), std::invalid_argument);
}

TEST_CASE("rotation columns and matrix") {
  const Rotation r = deg(30);
  CHECK(r.q1() * r.q1() + r.q2() * r.q2() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.col().dot(r.col_perp()) == doctest::Approx(0.0));
  CHECK((r.matrix().col(0) - r.col()).norm() == 0.0);
  CHECK((r.matrix().col(1) - r.col_perp()).norm() == 0.0);
}

TEST_CASE("overlap coefficients follow p1 = q^T d_perp") {
  // q^T d_perp = sin(theta_Q - theta_D).
  auto [p1, p2] = rotkde::overlap_coeffs(deg(0), deg(30));
  CHECK(p1 == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p2 == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-14));
  auto [s1, s2] = rotkde::overlap_coeffs(deg(30), deg(0));
  CHECK(s1 == doctest::Approx(-p1).epsilon(1e-14));
  CHECK(s2 == doctest::Approx(p2).epsilon(1e-14));
  auto [r1, r2] = rotkde::overlap_coeffs(deg(0), deg(90));
  CHECK(r1 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(r2) <= 1e-15);
  auto [z1, z2] = rotkde::overlap_coeffs(deg(17), deg(17));
  CHECK(z1 == 0.0);
  CHECK(z2 == doctest::Approx(1.0));
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-10, 10);
  for (int i = 0; i < 100; ++i) {
    auto [a, b] = rotkde::overlap_coeffs(Rotation::from_angle(u(gen)), Rotation::from_angle(u(gen)));
    CHECK(std::abs(a * a + b * b - 1) <= 1e-12);
  }
}

TEST_CASE("rho examples and symmetries") {
  CHECK(rotkde::rho(deg(12), deg(12)) == 0.0);
  CHECK(rotkde::rho(deg(0), deg(45)) == doctest::Approx(std::sqrt(2.0) / 2).epsilon(1e-14));
  CHECK(std::abs(rotkde::rho(deg(0), deg(90))) <= 1e-15);
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    const double a = u(gen), b = u(gen), c = u(gen);
    const Rotation ra = Rotation::from_angle(a), rb = Rotation::from_angle(b);
    const double r = rotkde::rho(ra, rb);
    CHECK(r >= 0.0);
    CHECK(r <= std::sqrt(2.0) / 2 + 1e-15);
    CHECK(r == doctest::Approx(rotkde::rho(rb, ra)).epsilon(1e-12));
    CHECK(r == doctest::Approx(rotkde::rho(Rotation::from_angle(a + c), Rotation::from_angle(b + c)))
                   .epsilon(1e-9));
    CHECK(r == doctest::Approx(rotkde::rho(ra, Rotation::from_angle(b + std::numbers::pi / 2)))
                   .epsilon(1e-9));
  }
}

TEST_CASE("same_rotation wraps at 2 pi") {
  CHECK(rotkde::same_rotation(Rotation::from_angle(0), Rotation::from_angle(2 * std::numbers::pi - 1e-13)));
  CHECK_FALSE(rotkde::same_rotation(Rotation::from_angle(0), Rotation::from_angle(1e-9)));
}

TEST_CASE("uniform nets") {
  const RotationNet coarse = RotationNet::uniform(0.8);
  CHECK(coarse.size() == 1);
  CHECK(coarse.capacity() == 0.0);
  const RotationNet net = RotationNet::uniform(0.1);
  CHECK(net.size() == 15);
  CHECK(net.capacity() == doctest::Approx(std::log(15.0)));
  CHECK(net.capacity() == doctest::Approx(2.708).epsilon(1e-3));
  for (double delta : {0.3, 0.1, 0.03, 0.01, 0.5, 0.7}) {
    const RotationNet n = RotationNet::uniform(delta);
    CHECK(n.size() == static_cast<std::size_t>(std::floor(std::numbers::pi / (2 * std::asin(delta)))));
    if (n.size() > 1) CHECK(n.min_separation() >= delta);
    // One more equispaced point breaks separation.
    const double spacing = std::numbers::pi / (2 * (n.size() + 1));
    CHECK(std::sin(spacing) < delta);
    for (std::size_t i = 1; i < n.size(); ++i) CHECK(n[i].theta() > n[i - 1].theta());
  }
  CHECK_THROWS_AS(RotationNet::uniform(1.5), std::invalid_argument);
  CHECK_THROWS_AS(RotationNet::uniform(0.0), std::invalid_argument);
}

TEST_CASE("user-supplied nets are validated") {
  CHECK(RotationNet::from_members(0.5, {deg(0), deg(45)}).size() == 2);
  CHECK_THROWS_AS(RotationNet::from_members(0.5, {deg(0), deg(10)}), std::invalid_argument);
  CHECK_THROWS_AS(RotationNet::from_members(0.5, {}), std::invalid_argument);
}

TEST_CASE("pseudo-inframetric inequality") {
  std::vector<Rotation> t{deg(0), deg(45), deg(90)};
  CHECK(rotkde::pseudo_inframetric_check<double>(t));
  const RotationNet net = RotationNet::uniform(0.1);
  CHECK(rotkde::pseudo_inframetric_check<double>(net.members()));
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
  for (int i = 0; i < 200; ++i) {
    std::vector<Rotation> tri{Rotation::from_angle(u(gen)), Rotation::from_angle(u(gen)),
                              Rotation::from_angle(u(gen))};
    CHECK(rotkde::pseudo_inframetric_check<double>(tri));
  }
  std::vector<Rotation> two{deg(0), deg(1)};
  CHECK_THROWS_AS(rotkde::pseudo_inframetric_check<double>(two), std::invalid_argument);
}
