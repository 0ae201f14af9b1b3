#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>

namespace air {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Adaptation parameter, embedded in R^s. Scalars have size 1; covariance
/// parameters are stored column-major (so the Euclidean norm is Frobenius).
using Parameter = Eigen::VectorXd;

inline Parameter scalar_parameter(double value) {
  Parameter p(1);
  p(0) = value;
  return p;
}

}  // namespace air
