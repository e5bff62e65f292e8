#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace rotkde {

/// Planar rotation Q = ((q1, -q2), (q2, q1)) with angle canonicalized to [0, 2pi).
template <typename Scalar>
class BasicRotation {
 public:
  using Vector = Eigen::Matrix<Scalar, 2, 1>;
  using Matrix = Eigen::Matrix<Scalar, 2, 2>;

  BasicRotation() = default;

  static BasicRotation from_angle(Scalar theta) {
    if (!std::isfinite(theta))
      throw std::invalid_argument("rotation angle must be finite");
    const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
    Scalar t = std::fmod(theta, two_pi);
    if (t < 0) t += two_pi;
    if (t >= two_pi) t = 0;
    BasicRotation r;
    r.theta_ = t;
    r.q1_ = std::cos(t);
    r.q2_ = std::sin(t);
    return r;
  }

  static BasicRotation identity() { return from_angle(Scalar(0)); }

  Scalar theta() const { return theta_; }
  Scalar q1() const { return q1_; }
  Scalar q2() const { return q2_; }

  /// First column q = (q1, q2).
  Vector col() const { return {q1_, q2_}; }
  /// Second column q_perp = (-q2, q1).
  Vector col_perp() const { return {-q2_, q1_}; }

  Matrix matrix() const {
    Matrix m;
    m << q1_, -q2_, q2_, q1_;
    return m;
  }

  /// Composition this * other (angles add).
  BasicRotation operator*(const BasicRotation &other) const {
    return from_angle(theta_ + other.theta_);
  }

 private:
  Scalar theta_{0};
  Scalar q1_{1};
  Scalar q2_{0};
};

using Rotation = BasicRotation<double>;

/// Overlap coefficients (p1, p2) = (q^T d_perp, q^T d).
template <typename Scalar>
std::pair<Scalar, Scalar> overlap_coeffs(const BasicRotation<Scalar> &d,
                                         const BasicRotation<Scalar> &q) {
  return {q.col().dot(d.col_perp()), q.col().dot(d.col())};
}

/// Pseudo-metric rho(a, b) = min(|p1(b, a)|, |p2(a, b)|).
template <typename Scalar>
Scalar rho(const BasicRotation<Scalar> &a, const BasicRotation<Scalar> &b) {
  const Scalar p1 = overlap_coeffs(b, a).first;
  const Scalar p2 = overlap_coeffs(a, b).second;
  return std::min(std::abs(p1), std::abs(p2));
}

/// Same rotation up to the canonical-angle tolerance 1e-12 (wrapping at 2pi).
template <typename Scalar>
bool same_rotation(const BasicRotation<Scalar> &a, const BasicRotation<Scalar> &b,
                   Scalar tol = Scalar(1e-12)) {
  const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  const Scalar diff = std::abs(a.theta() - b.theta());
  return diff <= tol || two_pi - diff <= tol;
}

/// A delta-separated set of rotations with capacity ln(card).
template <typename Scalar>
class BasicRotationNet {
 public:
  using RotationT = BasicRotation<Scalar>;

  /// Uniform grid of k = max(1, floor(pi / (2 asin delta))) angles with
  /// spacing pi/(2k) on [0, pi/2), ascending.
  static BasicRotationNet uniform(Scalar delta) {
    check_delta(delta);
    const Scalar pi = std::numbers::pi_v<Scalar>;
    long k = 1;
    if (delta <= std::sqrt(Scalar(2)) / 2)
      k = std::max<long>(1, static_cast<long>(std::floor(pi / (2 * std::asin(delta)))));
    std::vector<RotationT> members;
    members.reserve(k);
    for (long i = 0; i < k; ++i)
      members.push_back(RotationT::from_angle(pi * Scalar(i) / Scalar(2 * k)));
    return BasicRotationNet(delta, std::move(members));
  }

  /// User-supplied members; rejects any pair closer than delta in rho.
  static BasicRotationNet from_members(Scalar delta, std::vector<RotationT> members) {
    check_delta(delta);
    if (members.empty()) throw std::invalid_argument("rotation net must be nonempty");
    for (std::size_t i = 0; i < members.size(); ++i)
      for (std::size_t j = i + 1; j < members.size(); ++j)
        if (rho(members[i], members[j]) < delta)
          throw std::invalid_argument("rotation net members " + std::to_string(i) +
                                      " and " + std::to_string(j) +
                                      " are not delta-separated");
    return BasicRotationNet(delta, std::move(members));
  }

  Scalar delta() const { return delta_; }
  std::size_t size() const { return members_.size(); }
  const std::vector<RotationT> &members() const { return members_; }
  const RotationT &operator[](std::size_t i) const { return members_[i]; }
  Scalar capacity() const { return std::log(Scalar(members_.size())); }

  /// Smallest pairwise rho over distinct members (+inf for a singleton).
  Scalar min_separation() const {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (std::size_t i = 0; i < members_.size(); ++i)
      for (std::size_t j = 0; j < members_.size(); ++j)
        if (i != j) best = std::min(best, rho(members_[i], members_[j]));
    return best;
  }

 private:
  BasicRotationNet(Scalar delta, std::vector<RotationT> members)
      : delta_(delta), members_(std::move(members)) {}

  static void check_delta(Scalar delta) {
    if (!(delta > 0 && delta < 1))
      throw std::invalid_argument("delta must lie in (0, 1)");
  }

  Scalar delta_;
  std::vector<RotationT> members_;
};

using RotationNet = BasicRotationNet<double>;

/// rho(Q1, Q3) <= 2 sqrt(2) [rho(Q1, Q2) + rho(Q2, Q3)] over all ordered triples.
template <typename Scalar>
bool pseudo_inframetric_check(std::span<const BasicRotation<Scalar>> points) {
  if (points.size() < 3)
    throw std::invalid_argument("pseudo_inframetric_check needs at least 3 points");
  const std::size_t n = points.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> r(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) r(i, j) = rho(points[i], points[j]);
  const Scalar c = 2 * std::sqrt(Scalar(2));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (r(i, k) > c * (r(i, j) + r(j, k))) return false;
  return true;
}

}  // namespace rotkde
