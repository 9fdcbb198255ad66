#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace grasplab {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Attitude matrix; expected to lie on SO(3) (see is_rotation()).
using Rotation = Eigen::Matrix3d;

/// Raised for invalid configurations (bad geometry, non-SPD mass matrices, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical solve fails (singular grasp, non-convergence).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace grasplab
