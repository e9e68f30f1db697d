#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace hmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;

/// Raised when an argument has the wrong number of entries.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a robot description violates one of its invariants.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an input document cannot be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by numerical routines on non-finite inputs or failed factorizations.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_size(Eigen::Index actual, Eigen::Index expected, const char* what) {
  if (actual != expected) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(expected) +
                         " entries, got " + std::to_string(actual));
  }
}

}  // namespace hmpc
