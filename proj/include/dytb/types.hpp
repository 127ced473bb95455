#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dytb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

/// Thrown on contract violations (bad shifts, vanishing accretivity
/// margins, dimension mismatches, invalid configuration).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

// Relative tolerances shared by the identity checks.
inline constexpr double kIdentityTolerance = 1e-12;
inline constexpr double kMarginThreshold = 1e-10;

}  // namespace dytb
