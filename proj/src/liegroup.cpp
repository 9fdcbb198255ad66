#include "grasplab/liegroup.hpp"

#include <cmath>

namespace grasplab {

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m, double tol) {
  const Mat3 sym = 0.5 * (m + m.transpose());
  if (sym.norm() > tol) {
    throw std::invalid_argument("vee: matrix is not antisymmetric (symmetric part norm " +
                                std::to_string(sym.norm()) + ")");
  }
  const Mat3 a = 0.5 * (m - m.transpose());
  return {a(2, 1), a(0, 2), a(1, 0)};
}

Rotation rot_x(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitX()).toRotationMatrix();
}

Rotation rot_y(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitY()).toRotationMatrix();
}

Rotation rot_z(double angle) {
  return Eigen::AngleAxisd(angle, Vec3::UnitZ()).toRotationMatrix();
}

Rotation exp_so3(const Vec3& v) {
  const double theta2 = v.squaredNorm();
  const Mat3 k = hat(v);
  double a = 0.0;
  double b = 0.0;
  if (theta2 < 1e-16) {
    // sin(t)/t and (1 - cos t)/t^2 to second order
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Mat3::Identity() + a * k + b * k * k;
}

double orthonormality_residual(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

bool is_rotation(const Mat3& r, double tol) {
  return orthonormality_residual(r) <= tol && std::abs(r.determinant() - 1.0) <= tol;
}

Rotation project_to_so3(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return svd.matrixU() * d * svd.matrixV().transpose();
}

Vec3 attitude_error(const Rotation& r, const Rotation& r_d) {
  const Mat3 m = r_d.transpose() * r - r.transpose() * r_d;
  return 0.5 * Vec3(m(2, 1), m(0, 2), m(1, 0));
}

Vec3 angular_velocity_error(const Rotation& r, const Vec3& omega, const Rotation& r_d,
                            const Vec3& omega_d) {
  return omega - r.transpose() * r_d * omega_d;
}

double attitude_error_function(const Rotation& r, const Rotation& r_d) {
  return 0.5 * (3.0 - (r_d.transpose() * r).trace());
}

Mat3 error_transport_matrix(const Rotation& r, const Rotation& r_d) {
  const Mat3 rt_rd = r.transpose() * r_d;
  return 0.5 * (rt_rd.trace() * Mat3::Identity() - rt_rd);
}

AttitudeError attitude_errors(const Rotation& r, const Vec3& omega, const Rotation& r_d,
                              const Vec3& omega_d) {
  return {attitude_error(r, r_d), angular_velocity_error(r, omega, r_d, omega_d),
          attitude_error_function(r, r_d)};
}

}  // namespace grasplab
