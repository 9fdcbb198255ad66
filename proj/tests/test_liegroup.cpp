#include <doctest.h>

#include "grasplab/liegroup.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace grasplab;

TEST_CASE("hat and vee are exact inverses") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = test::random_vec(rng, 10.0);
    const Vec3 back = vee(hat(v));
    CHECK(back == v);
    const Vec3 w = test::random_vec(rng);
    CHECK((hat(v) * w - v.cross(w)).norm() <= 1e-12 * (1.0 + v.norm() * w.norm()));
    CHECK((hat(v) + hat(v).transpose()).norm() == 0.0);
  }
}

TEST_CASE("vee rejects matrices with a symmetric part") {
  Mat3 m = hat(Vec3(1.0, 2.0, 3.0));
  m(0, 1) += 1e-3;
  CHECK_THROWS_AS(vee(m), std::invalid_argument);
}

TEST_CASE("exponential map agrees with axis-angle") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const Vec3 v = test::random_vec(rng, 3.0);
    const Rotation ref = Eigen::AngleAxisd(v.norm(), v.normalized()).toRotationMatrix();
    const Rotation r = exp_so3(v);
    CHECK((r - ref).norm() < 1e-13);
    CHECK(is_rotation(r, 1e-13));
  }
  const Vec3 tiny(1e-9, -2e-9, 5e-10);
  CHECK((exp_so3(tiny) - (Mat3::Identity() + hat(tiny))).norm() < 1e-17);
}

TEST_CASE("elementary rotations") {
  CHECK((rot_x(0.3) - exp_so3(Vec3(0.3, 0.0, 0.0))).norm() < 1e-15);
  CHECK((rot_y(-1.1) - exp_so3(Vec3(0.0, -1.1, 0.0))).norm() < 1e-15);
  CHECK((rot_z(2.0) - exp_so3(Vec3(0.0, 0.0, 2.0))).norm() < 1e-15);
}

TEST_CASE("projection onto SO(3)") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Rotation r = test::random_rotation(rng);
    Mat3 noisy = r;
    noisy += 1e-6 * hat(test::random_vec(rng)) + 1e-6 * Mat3::Random();
    const Rotation p = project_to_so3(noisy);
    CHECK(is_rotation(p, 1e-12));
    CHECK((p - r).norm() < 1e-5);
    CHECK((project_to_so3(r) - r).norm() < 1e-13);
  }
  const Mat3 reflection = Vec3(1.0, 1.0, -1.0).asDiagonal();
  CHECK(project_to_so3(reflection).determinant() > 0.0);
}

TEST_CASE("attitude error and error function") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Rotation rd = test::random_rotation(rng);
    CHECK(attitude_error(rd, rd).norm() < 1e-15);
    CHECK(attitude_error_function(rd, rd) < 1e-14);

    // rotation by theta about a unit axis: Psi = 1 - cos(theta), e_R = sin(theta) axis
    const Vec3 axis = test::random_vec(rng).normalized();
    const double theta = 0.1 + 2.5 * std::abs(test::random_vec(rng).x());
    const Rotation r = rd * Eigen::AngleAxisd(theta, axis).toRotationMatrix();
    CHECK(attitude_error_function(r, rd) == doctest::Approx(1.0 - std::cos(theta)).epsilon(1e-12));
    CHECK((attitude_error(r, rd) - std::sin(theta) * axis).norm() < 1e-12);
  }
}

TEST_CASE("attitude error kinematics match the transport matrix") {
  std::mt19937_64 rng(9);
  const double h = 1e-6;
  for (int i = 0; i < 50; ++i) {
    const Rotation rd = test::random_rotation(rng);
    const Rotation r = rd * exp_so3(test::random_vec(rng, 1.0));
    const Vec3 w = test::random_vec(rng);
    // fixed desired attitude: e_R' = E(R, R_d) e_w with e_w = w
    const Vec3 fd = (attitude_error(r * exp_so3(h * w), rd) - attitude_error(r * exp_so3(-h * w), rd)) /
                    (2.0 * h);
    CHECK((fd - error_transport_matrix(r, rd) * w).norm() < 1e-8);
    const AttitudeError ae = attitude_errors(r, w, rd, Vec3::Zero());
    CHECK((ae.e_omega - w).norm() < 1e-15);
  }
}
