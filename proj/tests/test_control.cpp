#include <doctest.h>

#include "grasplab/control.hpp"
#include "grasplab/simulation.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace grasplab;

namespace {

std::vector<Vec3> random_attachments(std::mt19937_64& rng, int k) {
  std::vector<Vec3> c;
  for (int i = 0; i < k; ++i) c.push_back(test::random_vec(rng, 0.5));
  return c;
}

PayloadState random_payload(std::mt19937_64& rng) {
  PayloadState s;
  s.p = test::random_vec(rng);
  s.v = test::random_vec(rng);
  s.rot = test::random_rotation(rng);
  s.omega = test::random_vec(rng);
  return s;
}

}  // namespace

TEST_CASE("figure-eight reference derivatives") {
  Reference ref;
  const double h = 1e-5;
  for (double t = 0.0; t < 10.0; t += 0.37) {
    const RefSample s = ref.at(t);
    const Vec3 v_fd = (ref.at(t + h).p - ref.at(t - h).p) / (2.0 * h);
    const Vec3 a_fd = (ref.at(t + h).v - ref.at(t - h).v) / (2.0 * h);
    CHECK((s.v - v_fd).norm() < 1e-8);
    CHECK((s.a - a_fd).norm() < 1e-8);
    CHECK(s.p.z() == ref.center.z());
  }
  ref.kind = Reference::Kind::Hover;
  CHECK(ref.at(3.0).p == ref.center);
  CHECK(ref.at(3.0).v.norm() == 0.0);
}

TEST_CASE("default payload gains") {
  Mat3 j = Vec3(0.1, 0.2, 0.3).asDiagonal();
  const PayloadGains g = PayloadGains::defaults(j);
  CHECK((g.kp - 4.0 * Mat3::Identity()).norm() == 0.0);
  CHECK((g.kv - 4.0 * Mat3::Identity()).norm() == 0.0);
  CHECK(g.kr(0, 0) == doctest::Approx(8.0 * 0.6));
  CHECK(g.kw(2, 2) == doctest::Approx(2.5 * 0.6));
  PayloadGains bad = g;
  bad.kv(0, 0) = -1.0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("wrench law produces the closed-loop accelerations on the nominal payload") {
  std::mt19937_64 rng(1);
  PayloadParams nominal;
  nominal.mass = 1.3;
  nominal.inertia << 0.05, 0.002, 0.0, 0.002, 0.07, 0.001, 0.0, 0.001, 0.09;
  const PayloadGains gains = PayloadGains::defaults(nominal.inertia);
  const Vec3 g(0.0, 0.0, -9.81);
  for (int trial = 0; trial < 50; ++trial) {
    const PayloadState s = random_payload(rng);
    RefSample ref;
    ref.p = test::random_vec(rng);
    ref.v = test::random_vec(rng);
    ref.a = test::random_vec(rng);
    ref.rot = test::random_rotation(rng);
    ref.omega = test::random_vec(rng);
    ref.omega_dot = test::random_vec(rng);

    const WrenchCommand w = wrench_nominal(nominal, s, ref, gains, g);
    const PayloadDerivative d = payload_rhs_wrench(nominal, s, w.inertial(s.rot), Vec6::Zero(), g);
    const PayloadAccelerationTarget target = closed_loop_acceleration(nominal, s, ref, gains);
    CHECK((d.v_dot - target.linear).norm() < 1e-12);
    CHECK((d.omega_dot - target.angular).norm() < 1e-11);

    // error dynamics: e_v' = -kp e_p - kv e_v
    const PayloadErrors e = payload_errors(s, ref);
    CHECK((d.v_dot - ref.a + gains.kp * e.e_p + gains.kv * e.e_v).norm() < 1e-12);

    // the learned mean is cancelled exactly when it matches the disturbance
    Vec6 mean;
    mean << test::random_vec(rng), test::random_vec(rng);
    const WrenchCommand wl = wrench_learning(nominal, s, ref, gains, mean, g);
    const PayloadDerivative dl = payload_rhs_wrench(nominal, s, wl.inertial(s.rot), mean, g);
    CHECK((dl.v_dot - target.linear).norm() < 1e-12);
    CHECK((dl.omega_dot - target.angular).norm() < 1e-11);
  }
}

TEST_CASE("wrench law vanishes into gravity compensation on the reference") {
  PayloadParams nominal;
  const PayloadGains gains = PayloadGains::defaults(nominal.inertia);
  const Vec3 g(0.0, 0.0, -9.81);
  RefSample ref;
  ref.p = Vec3(1.0, 2.0, 3.0);
  ref.rot = rot_z(0.4);
  PayloadState s;
  s.p = ref.p;
  s.rot = ref.rot;
  const WrenchCommand w = wrench_nominal(nominal, s, ref, gains, g);
  CHECK((w.force - Vec3(0.0, 0.0, nominal.mass * 9.81)).norm() < 1e-14);
  CHECK(w.torque.norm() < 1e-14);
  const PayloadErrors e = payload_errors(s, ref);
  CHECK(e.psi == 0.0);
}

TEST_CASE("allocation reproduces the commanded wrench") {
  std::mt19937_64 rng(2);
  const std::vector<int> leaders = default_leader_set(2);
  CHECK(leaders == std::vector<int>{0, 1, 2});
  for (int trial = 0; trial < 1000; ++trial) {
    const std::vector<Vec3> c = random_attachments(rng, 4);
    const Rotation r = test::random_rotation(rng);
    Vec6 w;
    w << test::random_vec(rng, 20.0), test::random_vec(rng, 2.0);
    const VecX eta = test::random_vecx(rng, 6, 3.0);
    for (auto mode : {InternalForceBasis::Grasp, InternalForceBasis::Follower}) {
      const Allocation a = allocate(w, r, c, leaders, eta, mode);
      const VecX res = grasp_matrix(r, c) * a.lambda - w;
      CHECK(res.norm() <= 1e-9 * (1.0 + w.norm()));
    }
  }
}

TEST_CASE("leader block is the least-norm solution") {
  std::mt19937_64 rng(3);
  const std::vector<Vec3> c = random_attachments(rng, 4);
  const Rotation r = test::random_rotation(rng);
  Vec6 w;
  w << test::random_vec(rng, 10.0), test::random_vec(rng);
  const std::vector<int> leaders{0, 1, 2};
  const Allocation a = allocate(w, r, c, leaders, VecX());
  const std::vector<Vec3> cl(c.begin(), c.begin() + 3);
  const MatX gl = grasp_matrix(r, cl);
  // independent least-norm solution through the normal equations of G_l G_l^T
  const VecX oracle = gl.transpose() * (gl * gl.transpose()).ldlt().solve(w);
  CHECK((a.lambda.head(9) - oracle).norm() < 1e-10 * oracle.norm());
  CHECK(a.lambda.tail(3).norm() == 0.0);
  CHECK(a.leader_condition >= 1.0);
  CHECK(std::isfinite(a.leader_condition));
}

TEST_CASE("internal forces are wrench neutral") {
  std::mt19937_64 rng(4);
  const std::vector<int> leaders = default_leader_set(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<Vec3> c = random_attachments(rng, 4);
    const Rotation r = test::random_rotation(rng);
    const MatX g = grasp_matrix(r, c);
    Vec6 w;
    w << test::random_vec(rng, 10.0), test::random_vec(rng);

    const MatX basis = internal_force_basis(r, c, leaders, InternalForceBasis::Grasp);
    CHECK(basis.cols() == 12 - 6);
    CHECK((basis.transpose() * basis - MatX::Identity(6, 6)).norm() < 1e-12);
    CHECK((g * basis).norm() < 1e-12);

    const VecX eta = test::random_vecx(rng, 6, 5.0);
    const Allocation a0 = allocate(w, r, c, leaders, VecX());
    const Allocation a1 = allocate(w, r, c, leaders, eta);
    CHECK((g * (a1.lambda - a0.lambda)).norm() < 1e-11);
    CHECK((a1.lambda - a0.lambda - a1.basis * eta).norm() < 1e-12);

    // the follower kernel only moves the follower contact; one contact has no kernel
    const MatX bf = internal_force_basis(r, c, leaders, InternalForceBasis::Follower);
    CHECK(bf.cols() == 0);
  }
  // three followers: G_f is 6 x 9 with full row rank
  const std::vector<Vec3> c = random_attachments(rng, 6);
  const MatX bf = internal_force_basis(Rotation::Identity(), c, {0, 1, 2},
                                       InternalForceBasis::Follower);
  CHECK(bf.cols() == 9 - 6);
}

TEST_CASE("eta longer or shorter than the kernel") {
  std::mt19937_64 rng(5);
  const std::vector<Vec3> c = random_attachments(rng, 4);
  const Rotation r = test::random_rotation(rng);
  Vec6 w = Vec6::Zero();
  w(2) = 10.0;
  const Allocation a = allocate(w, r, c, {0, 1, 2}, VecX::Ones(10));
  CHECK(a.eta.size() == 6);
  CHECK((a.eta - VecX::Ones(6)).norm() == 0.0);
  const Allocation b = allocate(w, r, c, {0, 1, 2}, VecX::Ones(2));
  CHECK(b.eta.tail(4).norm() == 0.0);
}

TEST_CASE("wrench mismatch diagnostics") {
  std::mt19937_64 rng(6);
  const std::vector<Vec3> c = random_attachments(rng, 4);
  const MatX g = grasp_matrix(Rotation::Identity(), c);
  const VecX lc = test::random_vecx(rng, 12);
  const VecX la = test::random_vecx(rng, 12);
  const Vec6 w = g * lc;
  const RealizationDiagnostics d = wrench_mismatch(la, lc, w, g);
  CHECK((d.e_lambda - (la - lc)).norm() == 0.0);
  CHECK((d.delta_w - g * (la - lc)).norm() < 1e-12);
  CHECK_THROWS(wrench_mismatch(la.head(9), lc, w, g));
}

TEST_CASE("interface constants recovered from synthetic data") {
  std::mt19937_64 rng(7);
  const double alpha = 1.7;
  const double gamma = 3.2;
  const double theta = 0.05;
  const std::vector<double> kappa{0.4, 0.9};
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<InterfaceSample> samples;
  double t_k = 0.0;
  for (int i = 0; i < 400; ++i) {
    InterfaceSample s;
    s.t = 0.01 * i;
    if (i % 50 == 0) t_k = s.t;
    s.t_k = t_k;
    s.e_lambda_k = 0.5 + u(rng);
    s.rho = {u(rng), u(rng)};
    s.delta_w = alpha * std::exp(-gamma * (s.t - s.t_k)) * s.e_lambda_k + theta +
                kappa[0] * s.rho[0] + kappa[1] * s.rho[1];
    samples.push_back(s);
  }
  const InterfaceConstants c = fit_interface_constants(samples);
  CHECK(c.alpha == doctest::Approx(alpha).epsilon(1e-5));
  CHECK(c.gamma == doctest::Approx(gamma).epsilon(1e-5));
  CHECK(c.theta == doctest::Approx(theta).epsilon(1e-4));
  CHECK(c.kappa[0] == doctest::Approx(kappa[0]).epsilon(1e-5));
  CHECK(c.kappa[1] == doctest::Approx(kappa[1]).epsilon(1e-5));
  CHECK(c.rms_residual < 1e-7);
  CHECK(c.coverage == 1.0);

  // noisy labels: the shifted offset envelopes every sample
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& s : samples) s.delta_w = std::max(0.0, s.delta_w + noise(rng));
  const InterfaceConstants cn = fit_interface_constants(samples);
  CHECK(cn.coverage == 1.0);
  CHECK(cn.alpha >= 0.0);
  CHECK(cn.theta >= theta);
  CHECK(fit_interface_constants({}).coverage == 0.0);
}

TEST_CASE("agent realization honors the dynamics and the grasp kinematics") {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  const Vec3 g = cfg.gravity_vector();
  const CoupledSystem sys(cfg.agent_params(), cfg.payload, g);
  std::mt19937_64 rng(8);
  CoupledState z = initial_state(cfg, sys);
  z.payload.v = test::random_vec(rng, 0.5);
  z.payload.omega = test::random_vec(rng, 0.3);
  z = sys.consistent_init(z);

  const int n = cfg.arms;
  const RefSample ref = cfg.reference.at(0.0);
  const PayloadAccelerationTarget acc = closed_loop_acceleration(cfg.payload, z.payload, ref, cfg.gains);
  const WrenchCommand wc = wrench_nominal(cfg.payload, z.payload, ref, cfg.gains, g);
  const Allocation alloc =
      allocate(wc.inertial(z.payload.rot), z.payload.rot, cfg.payload.attachments, {0, 1, 2}, VecX());

  const Vec3 wl = z.payload.rot * z.payload.omega;
  const Vec3 wl_dot = z.payload.rot * acc.angular;
  for (int j = 0; j < cfg.agents; ++j) {
    const AgentState& s = z.agents[j];
    GraspFrame gf;
    gf.rot = z.payload.rot.transpose() * s.rot;
    gf.offset = z.payload.rot.transpose() * (s.x - z.payload.p);
    gf.joints = s.r;
    const std::vector<Vec3> att(cfg.payload.attachments.begin() + j * n,
                                cfg.payload.attachments.begin() + (j + 1) * n);
    AgentRealization ar(cfg.agent, gf, att, cfg.agent_gains, g);
    std::vector<Vec3> lc;
    for (int b = 0; b < n; ++b) lc.push_back(alloc.lambda.segment<3>(3 * (j * n + b)));

    const AgentCommand cmd = ar.compute(s, lc, z.payload, acc, nullptr);
    REQUIRE(cmd.contact_forces.size() == 3 * n);
    CHECK(cmd.input.thrust > 0.0);
    CHECK_FALSE(cmd.attitude_held);

    // the thrust axis follows the required force
    CHECK((cmd.desired_rot.col(2) - cmd.required_force.normalized()).norm() < 1e-12);
    CHECK(is_rotation(cmd.desired_rot, 1e-12));

    // accelerations from the agent dynamics with the predicted contact forces
    const VelocityDynamics vd = agent_velocity_dynamics(cfg.agent, s, cmd.input, AgentWrench::zero(n), g);
    VecX force = vd.force;
    for (int b = 0; b < n; ++b) {
      const Vec3 lb = cmd.contact_forces.segment<3>(3 * b);
      const MatX jt = contact_jacobian(cfg.agent, s, b);
      force.head<3>() -= jt.topRows<3>() * lb;
      force.segment<3>(3) -= lb;
      force.tail(n) -= jt.bottomRows(n) * lb;
    }
    const VecX a = vd.mass.ldlt().solve(force);

    // contact acceleration by a second difference along the second-order motion
    const double h = 1e-4;
    auto contact_at = [&](double tau, int b) {
      AgentState q = s;
      q.rot = s.rot * exp_so3(tau * s.omega + 0.5 * tau * tau * a.head<3>());
      q.x = s.x + tau * s.v + 0.5 * tau * tau * a.segment<3>(3);
      q.r = s.r + tau * s.rdot + 0.5 * tau * tau * a.tail(n);
      return contact_point(cfg.agent, q, b);
    };
    for (int b = 0; b < n; ++b) {
      const Vec3 c_dd = (contact_at(h, b) - 2.0 * contact_at(0.0, b) + contact_at(-h, b)) / (h * h);
      const Vec3 arm = z.payload.rot * att[b];
      const Vec3 target = acc.linear + wl_dot.cross(arm) + wl.cross(wl.cross(arm));
      CHECK((c_dd - target).norm() < 1e-5);
    }

    // the grasped pose keeps every contact on its attachment with the requested tilt
    const Vec3 b3 = cmd.desired_rot.col(2);
    const std::optional<GraspFrame> pose = ar.grasped_pose(z.payload, b3);
    REQUIRE(pose.has_value());
    AgentState q = s;
    q.rot = z.payload.rot * pose->rot;
    q.x = z.payload.p + z.payload.rot * pose->offset;
    q.r = pose->joints;
    CHECK((q.rot.col(2) - b3).norm() < 1e-9);
    for (int b = 0; b < n; ++b) {
      CHECK((contact_point(cfg.agent, q, b) - (z.payload.p + z.payload.rot * att[b])).norm() < 1e-10);
    }
  }
}

TEST_CASE("desired rotation is held when the required force vanishes") {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  const Vec3 g = cfg.gravity_vector();
  const CoupledSystem sys(cfg.agent_params(), cfg.payload, g);
  const CoupledState z = initial_state(cfg, sys);
  const int n = cfg.arms;
  const AgentState& s = z.agents[0];
  GraspFrame gf;
  gf.rot = z.payload.rot.transpose() * s.rot;
  gf.offset = z.payload.rot.transpose() * (s.x - z.payload.p);
  gf.joints = s.r;
  const std::vector<Vec3> att(cfg.payload.attachments.begin(), cfg.payload.attachments.begin() + n);
  AgentRealization ar(cfg.agent, gf, att, cfg.agent_gains, g);

  PayloadAccelerationTarget acc;
  // every arm pulls the payload down by exactly the agent weight share
  std::vector<Vec3> lc(n, cfg.agent.total_mass() * g / n);
  CHECK_FALSE(ar.desired_rotation(lc, z.payload, acc, nullptr).has_value());
  const AgentCommand cmd = ar.compute(s, lc, z.payload, acc, nullptr);
  CHECK(cmd.attitude_held);
  CHECK(is_rotation(cmd.desired_rot, 1e-12));

  // a learned vertical disturbance enters the required force
  std::vector<Vec3> lift(n, Vec3::Zero());
  AgentWrench f_hat = AgentWrench::zero(n);
  f_hat.force = Vec3(0.0, 0.0, 3.0);
  Vec3 required = Vec3::Zero();
  REQUIRE(ar.desired_rotation(lift, z.payload, acc, &f_hat, nullptr, &required).has_value());
  CHECK((required - (-cfg.agent.total_mass() * g - f_hat.force)).norm() < 1e-12);
}
