#include <doctest.h>

#include "grasplab/payload_dae.hpp"
#include "grasplab/simulation.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace grasplab;

namespace {

struct Fixture {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  CoupledSystem sys{cfg.agent_params(), cfg.payload, cfg.gravity_vector(), cfg.integrator.alpha};
  Disturbances dist = make_disturbances(cfg);
};

std::vector<AgentInput> hover_inputs(const Fixture& f, std::mt19937_64& rng, double spread) {
  const double total = f.cfg.payload.mass + f.cfg.agents * f.cfg.agent.total_mass();
  std::vector<AgentInput> u;
  for (int j = 0; j < f.cfg.agents; ++j) {
    AgentInput a = AgentInput::zero(f.cfg.arms);
    a.thrust = total * f.cfg.gravity / f.cfg.agents + spread * test::random_vec(rng).x();
    a.torque = test::random_vec(rng, 0.05 * spread);
    a.joint_torque = test::random_vecx(rng, f.cfg.arms, 0.05 * spread);
    u.push_back(a);
  }
  return u;
}

CoupledState moving_state(const Fixture& f, std::mt19937_64& rng) {
  CoupledState z = initial_state(f.cfg, f.sys);
  z.payload.v = test::random_vec(rng, 0.5);
  z.payload.omega = test::random_vec(rng, 0.3);
  return f.sys.consistent_init(z);
}

VecX positions(const CoupledState& z) {
  VecX out(3 * (z.agents.size() + 1) + 9);
  int k = 0;
  for (const auto& a : z.agents) {
    out.segment<3>(k) = a.x;
    k += 3;
  }
  out.segment<3>(k) = z.payload.p;
  out.segment<9>(k + 3) = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(z.payload.rot.data());
  return out;
}

}  // namespace

TEST_CASE("grasp matrix maps forces to the net wrench") {
  std::mt19937_64 rng(1);
  std::vector<Vec3> c;
  for (int i = 0; i < 4; ++i) c.push_back(test::random_vec(rng));
  for (int trial = 0; trial < 50; ++trial) {
    const Rotation r = test::random_rotation(rng);
    const VecX lam = test::random_vecx(rng, 12, 5.0);
    Vec3 f = Vec3::Zero();
    Vec3 tau = Vec3::Zero();
    for (int i = 0; i < 4; ++i) {
      const Vec3 li = lam.segment<3>(3 * i);
      f += li;
      tau += (r * c[i]).cross(li);
    }
    const VecX w = grasp_matrix(r, c) * lam;
    CHECK((w.head<3>() - f).norm() < 1e-12);
    CHECK((w.tail<3>() - tau).norm() < 1e-12);
  }
}

TEST_CASE("payload dynamics in force and wrench form agree") {
  const Fixture f;
  std::mt19937_64 rng(2);
  const PayloadParams& p = f.cfg.payload;
  for (int trial = 0; trial < 20; ++trial) {
    PayloadState s;
    s.p = test::random_vec(rng);
    s.v = test::random_vec(rng);
    s.rot = test::random_rotation(rng);
    s.omega = test::random_vec(rng);
    const VecX lam = test::random_vecx(rng, 3 * static_cast<int>(p.attachments.size()), 4.0);
    Vec6 dist;
    dist << test::random_vec(rng), test::random_vec(rng);
    const Vec3 g = f.cfg.gravity_vector();

    const PayloadDerivative d = payload_rhs(p, s, lam, dist, g);
    const Vec6 w = grasp_matrix(s.rot, p.attachments) * lam;
    const PayloadDerivative dw = payload_rhs_wrench(p, s, w, dist, g);
    CHECK((d.v_dot - dw.v_dot).norm() < 1e-12);
    CHECK((d.omega_dot - dw.omega_dot).norm() < 1e-12);

    // Newton-Euler written out directly
    const Vec3 v_dot = (w.head<3>() + dist.head<3>()) / p.mass + g;
    const Vec3 tau_b = s.rot.transpose() * w.tail<3>() + dist.tail<3>();
    const Vec3 w_dot = p.inertia.inverse() * (tau_b - s.omega.cross(p.inertia * s.omega));
    CHECK((d.v_dot - v_dot).norm() < 1e-12);
    CHECK((d.omega_dot - w_dot).norm() < 1e-12);
    CHECK((d.p_dot - s.v).norm() == 0.0);
    CHECK((d.rot_dot - s.rot * hat(s.omega)).norm() < 1e-15);

    const Vec6 wb = contact_wrench_body(p, s, lam);
    CHECK((wb.head<3>() - w.head<3>()).norm() < 1e-12);
    CHECK((wb.tail<3>() - s.rot.transpose() * w.tail<3>()).norm() < 1e-12);
  }
}

TEST_CASE("differential dimension") {
  const Fixture f;
  const CoupledState z = initial_state(f.cfg, f.sys);
  CHECK(z.differential_dimension() == 12 * (2 + 1) + 2 * 2 * 2);
  CHECK(f.sys.velocity_dimension() == 2 * (6 + 2) + 6);
}

TEST_CASE("consistent initialization satisfies position and velocity constraints") {
  const Fixture f;
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const CoupledState z = moving_state(f, rng);
    CHECK(f.sys.grasp_constraints(z).norm() < 1e-10);
    CHECK(f.sys.constraint_velocity(z).norm() < 1e-10);
    for (const auto& a : z.agents) CHECK(is_rotation(a.rot, 1e-12));
  }
}

TEST_CASE("constraint jacobian matches the time derivative of the constraints") {
  const Fixture f;
  std::mt19937_64 rng(4);
  CoupledState z = moving_state(f, rng);
  for (auto& a : z.agents) {
    a.omega = test::random_vec(rng);
    a.v = test::random_vec(rng);
    a.rdot = test::random_vecx(rng, f.cfg.arms);
  }
  const ConstraintJacobian cj = f.sys.constraint_jacobian(z);
  const VecX vel = f.sys.velocities(z);

  // drift every body along its velocity and difference the constraints
  auto drift = [&](double h) {
    CoupledState s = z;
    for (auto& a : s.agents) {
      a.rot = a.rot * exp_so3(h * a.omega);
      a.x += h * a.v;
      a.r += h * a.rdot;
    }
    s.payload.rot = s.payload.rot * exp_so3(h * s.payload.omega);
    s.payload.p += h * s.payload.v;
    return s;
  };
  const double h = 1e-6;
  const VecX fd = (f.sys.grasp_constraints(drift(h)) - f.sys.grasp_constraints(drift(-h))) / (2 * h);
  CHECK((cj.jacobian * vel - fd).norm() < 1e-7);
  CHECK((f.sys.constraint_velocity(z) - cj.jacobian * vel).norm() < 1e-12);
}

TEST_CASE("Schur complement and dense KKT multipliers agree") {
  const Fixture f;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    CoupledState z = moving_state(f, rng);
    // off the manifold, so the Baumgarte terms are exercised
    z.agents[0].x += test::random_vec(rng, 1e-4);
    z.agents[1].omega += test::random_vec(rng, 1e-2);
    z.agents[1].sync_momenta(f.cfg.agent);
    const std::vector<AgentInput> u = hover_inputs(f, rng, 2.0);
    const ContactSolve cs = f.sys.solve_contact_forces(z, u, f.dist);
    const VecX dense = f.sys.solve_contact_forces_dense(z, u, f.dist);
    CHECK((cs.lambda - dense).norm() <= 1e-9 * (1.0 + dense.norm()));
    CHECK(cs.relative_residual < 1e-12);
    CHECK_FALSE(cs.least_squares_fallback);
  }
}

TEST_CASE("RK4 step converges at fourth order") {
  const Fixture f;
  std::mt19937_64 rng(6);
  const CoupledState z0 = moving_state(f, rng);
  const std::vector<AgentInput> u = hover_inputs(f, rng, 3.0);
  const double horizon = 0.16;
  auto run = [&](int steps) {
    CoupledState z = z0;
    for (int i = 0; i < steps; ++i) z = f.sys.step(z, u, f.dist, horizon / steps);
    return positions(z);
  };
  const VecX a = run(16);
  const VecX b = run(32);
  const VecX c = run(64);
  const double ratio = (a - b).norm() / (b - c).norm();
  MESSAGE("RK4 Richardson ratio " << ratio);
  CHECK(ratio == doctest::Approx(16.0).epsilon(0.25));
}

TEST_CASE("unforced team conserves energy and keeps the grasp") {
  Fixture f;
  std::mt19937_64 rng(7);
  const CoupledState z0 = moving_state(f, rng);
  const Disturbances none = Disturbances::none(f.cfg.agents, f.cfg.arms);
  std::vector<AgentInput> u(f.cfg.agents, AgentInput::zero(f.cfg.arms));
  CoupledState z = z0;
  const double e0 = f.sys.total_energy(z0);
  for (int i = 0; i < 500; ++i) z = f.sys.step(z, u, none, 1e-3);
  CHECK(std::abs(f.sys.total_energy(z) - e0) < 1e-6 * std::abs(e0));
  CHECK(f.sys.grasp_constraints(z).norm() < 1e-8);
  CHECK(f.sys.constraint_velocity(z).norm() < 1e-7);

  // free fall: total momentum changes at rate M g
  double mass = f.cfg.payload.mass + f.cfg.agents * f.cfg.agent.total_mass();
  const Vec3 dp = f.sys.total_linear_momentum(z) - f.sys.total_linear_momentum(z0);
  CHECK((dp - 0.5 * mass * f.cfg.gravity_vector()).norm() < 1e-8);
}

TEST_CASE("projection restores the constraints") {
  const Fixture f;
  std::mt19937_64 rng(8);
  CoupledState z = moving_state(f, rng);
  for (auto& a : z.agents) {
    a.x += test::random_vec(rng, 1e-3);
    a.r += test::random_vecx(rng, f.cfg.arms, 1e-3);
    a.v += test::random_vec(rng, 1e-2);
    a.sync_momenta(f.cfg.agent);
  }
  const Vec3 payload_p = z.payload.p;
  f.sys.project(z);
  CHECK(f.sys.grasp_constraints(z).norm() < 1e-12);
  CHECK(f.sys.constraint_velocity(z).norm() < 1e-10);
  CHECK((z.payload.p - payload_p).norm() == 0.0);
  for (const auto& a : z.agents) CHECK(a.momentum_residual(f.cfg.agent) < 1e-12);
}

TEST_CASE("infeasible grasp geometry is reported") {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  cfg.payload.attachments[0] *= 50.0;
  const CoupledSystem sys(cfg.agent_params(), cfg.payload, cfg.gravity_vector());
  CoupledState z;
  for (int j = 0; j < cfg.agents; ++j) z.agents.push_back(AgentState::at_rest(cfg.arms));
  CHECK_THROWS_AS(sys.consistent_init(z), SolverError);
}
