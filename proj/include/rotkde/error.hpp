#pragma once

#include <stdexcept>
#include <string>

namespace rotkde {

/// A numerical or validation failure (quadrature non-convergence, failed
/// Hölder certification, envelope check). Carries an optional location
/// such as the violating grid point.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string &what, std::string where = {})
      : std::runtime_error(what), where_(std::move(where)) {}

  const std::string &where() const noexcept { return where_; }

 private:
  std::string where_;
};

}  // namespace rotkde
