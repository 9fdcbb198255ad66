#pragma once

#include "grasplab/types.hpp"

namespace grasplab {

/// Cross-product matrix: hat(v) * w == v.cross(w).
Mat3 hat(const Vec3& v);

/// Inverse of hat(). Throws std::invalid_argument when the symmetric part of
/// `m` exceeds `tol` in Frobenius norm.
Vec3 vee(const Mat3& m, double tol = 1e-9);

Rotation rot_x(double angle);
Rotation rot_y(double angle);
Rotation rot_z(double angle);

/// Rodrigues formula, with a second-order series below |v| < 1e-8.
Rotation exp_so3(const Vec3& v);

/// Max-abs entry of R^T R - I.
double orthonormality_residual(const Mat3& r);
bool is_rotation(const Mat3& r, double tol = 1e-9);

/// Closest rotation in Frobenius norm (polar factor via SVD).
Rotation project_to_so3(const Mat3& m);

/// e_R = 1/2 (R_d^T R - R^T R_d)^vee.
Vec3 attitude_error(const Rotation& r, const Rotation& r_d);

/// e_w = w - R^T R_d w_d, both angular velocities in their body frames.
Vec3 angular_velocity_error(const Rotation& r, const Vec3& omega,
                            const Rotation& r_d, const Vec3& omega_d);

/// Psi = 1/2 tr(I - R_d^T R), in [0, 2].
double attitude_error_function(const Rotation& r, const Rotation& r_d);

/// E(R, R_d) = 1/2 (tr(R^T R_d) I - R^T R_d); d/dt e_R = E e_w along
/// rigid-body kinematics.
Mat3 error_transport_matrix(const Rotation& r, const Rotation& r_d);

/// Attitude, angular velocity and attitude-error-function bundle.
struct AttitudeError {
  Vec3 e_r = Vec3::Zero();
  Vec3 e_omega = Vec3::Zero();
  double psi = 0.0;
};

AttitudeError attitude_errors(const Rotation& r, const Vec3& omega,
                              const Rotation& r_d, const Vec3& omega_d);

}  // namespace grasplab
