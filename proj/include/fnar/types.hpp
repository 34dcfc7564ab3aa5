#pragma once

#include <Eigen/Dense>
#include <stdexcept>

namespace fnar {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown when an argument violates a documented precondition
/// (dimension mismatch, unknown label, invalid configuration value).
class InvalidInput : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a computation cannot proceed for numerical reasons:
/// rank deficiency, ill-conditioning, non-convergence, unstable dynamics.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fnar
