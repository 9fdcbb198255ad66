#include <doctest.h>

#include "grasplab/labels.hpp"
#include "grasplab/simulation.hpp"
#include "test_support.hpp"

#include <cmath>

using namespace grasplab;

namespace {

struct Trajectory {
  CoupledState prev;
  CoupledState cur;
  CoupledState next;
  VecX lambda;  // exact multipliers at cur
};

struct Setup {
  ScenarioConfig cfg = ScenarioConfig::defaults();
  CoupledSystem sys{cfg.agent_params(), cfg.payload, cfg.gravity_vector(), cfg.integrator.alpha};
  Disturbances dist;
  std::vector<AgentInput> inputs;
  CoupledState start;

  Setup() {
    cfg.disturbance_scale = 2.0;
    dist = make_disturbances(cfg);
    std::mt19937_64 rng(11);
    const double total = cfg.payload.mass + cfg.agents * cfg.agent.total_mass();
    for (int j = 0; j < cfg.agents; ++j) {
      AgentInput u = AgentInput::zero(cfg.arms);
      u.thrust = total * cfg.gravity / cfg.agents + test::random_vec(rng).x();
      u.torque = test::random_vec(rng, 0.05);
      u.joint_torque = test::random_vecx(rng, cfg.arms, 0.05);
      inputs.push_back(u);
    }
    CoupledState z = initial_state(cfg, sys);
    z.payload.v = test::random_vec(rng, 0.5);
    z.payload.omega = test::random_vec(rng, 0.3);
    start = sys.consistent_init(z);
  }

  // advance to t0, then sample three states spaced by h
  Trajectory sample(double h) const {
    Trajectory tr;
    CoupledState z = start;
    for (int i = 0; i < 50; ++i) z = sys.step(z, inputs, dist, 2e-3);
    tr.prev = z;
    tr.cur = sys.step(tr.prev, inputs, dist, h);
    tr.next = sys.step(tr.cur, inputs, dist, h);
    tr.lambda = sys.solve_contact_forces(tr.cur, inputs, dist).lambda;
    return tr;
  }
};

std::vector<Vec3> agent_lambda(const VecX& lambda, int j, int n) {
  std::vector<Vec3> out;
  for (int b = 0; b < n; ++b) out.push_back(lambda.segment<3>(3 * (j * n + b)));
  return out;
}

}  // namespace

TEST_CASE("feature layouts") {
  CHECK(payload_feature_dimension() == 20);
  CHECK(payload_feature_names().size() == 20);
  CHECK(payload_label_names().size() == 6);
  CHECK(agent_feature_dimension(2) == 9 + 3 + 2 + 3 + 3 + 2);
  CHECK(agent_feature_names(2).size() == 22);
  CHECK(agent_label_channels(2) == 8);
  CHECK(agent_label_names(3).size() == 9);

  std::mt19937_64 rng(1);
  PayloadState p;
  p.p = test::random_vec(rng);
  p.v = test::random_vec(rng);
  p.rot = test::random_rotation(rng);
  p.omega = test::random_vec(rng);
  const Vec3 e_p = test::random_vec(rng);
  const VecX f = payload_features(p, e_p);
  REQUIRE(f.size() == 20);
  CHECK(f.head<3>() == p.p);
  CHECK(f.segment<3>(3) == p.v);
  CHECK(f(6 + 1) == p.rot(0, 1));
  CHECK(f(6 + 3) == p.rot(1, 0));
  CHECK(f.segment<3>(15) == p.omega);
  CHECK(f.tail<2>() == e_p.head<2>());

  AgentState a = AgentState::at_rest(2);
  a.rot = test::random_rotation(rng);
  a.x = test::random_vec(rng);
  a.r = test::random_vecx(rng, 2);
  a.omega = test::random_vec(rng);
  a.v = test::random_vec(rng);
  a.rdot = test::random_vecx(rng, 2);
  const VecX g = agent_features(a);
  REQUIRE(g.size() == 22);
  CHECK(g(5) == a.rot(1, 2));
  CHECK(g.segment<3>(9) == a.x);
  CHECK(g.segment<2>(12) == a.r);
  CHECK(g.segment<3>(14) == a.omega);
  CHECK(g.segment<3>(17) == a.v);
  CHECK(g.tail<2>() == a.rdot);
}

TEST_CASE("labels reproduce the disturbances acting on the team") {
  const Setup s;
  const int n = s.cfg.arms;
  const Vec3 g = s.cfg.gravity_vector();

  auto errors = [&](double h) {
    const Trajectory tr = s.sample(h);
    double agent_err = 0.0;
    for (int j = 0; j < s.cfg.agents; ++j) {
      const VecX y = agent_label(s.cfg.agent, tr.prev.agents[j], tr.cur.agents[j], tr.next.agents[j], h,
                                 s.inputs[j], agent_lambda(tr.lambda, j, n), g);
      const VecX truth = s.dist.agents[j].evaluate(tr.cur.agents[j]).stacked();
      REQUIRE(y.size() == truth.size());
      agent_err = std::max(agent_err, (y - truth).norm());
    }
    const VecX yp = payload_label(s.cfg.payload, tr.prev.payload, tr.cur.payload, tr.next.payload, h,
                                  tr.lambda, g);
    const Vec6 truth = s.dist.payload.evaluate(tr.cur.payload);
    return std::pair{agent_err, (yp - truth).norm()};
  };

  const auto [a1, p1] = errors(2e-3);
  const auto [a2, p2] = errors(1e-3);
  const auto [a3, p3] = errors(5e-4);
  MESSAGE("agent label error " << a1 << ", " << a2 << ", " << a3);
  MESSAGE("payload label error " << p1 << ", " << p2 << ", " << p3);
  CHECK(a3 < 1e-4);
  CHECK(p3 < 1e-4);
  // central differences: second order in the sample spacing
  CHECK(a1 / a2 == doctest::Approx(4.0).epsilon(0.2));
  CHECK(a2 / a3 == doctest::Approx(4.0).epsilon(0.2));
  CHECK(p1 / p2 == doctest::Approx(4.0).epsilon(0.2));
  CHECK(p2 / p3 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("payload labels absorb the nominal model mismatch") {
  const Setup s;
  const Vec3 g = s.cfg.gravity_vector();
  const double h = 1e-3;
  const Trajectory tr = s.sample(h);
  PayloadParams nominal = s.cfg.payload;
  nominal.mass += 0.2;
  const VecX y = payload_label(nominal, tr.prev.payload, tr.cur.payload, tr.next.payload, h, tr.lambda, g);
  const VecX y0 =
      payload_label(s.cfg.payload, tr.prev.payload, tr.cur.payload, tr.next.payload, h, tr.lambda, g);
  const Vec3 acc = (tr.next.payload.v - tr.prev.payload.v) / (2.0 * h);
  CHECK((y.head<3>() - y0.head<3>() - 0.2 * (acc - g)).norm() < 1e-12);
  CHECK((y.tail<3>() - y0.tail<3>()).norm() == 0.0);
}

TEST_CASE("label noise statistics") {
  std::mt19937_64 rng(3);
  const VecX y = VecX::LinSpaced(4, -1.0, 2.0);
  const int draws = 20000;
  VecX sum = VecX::Zero(4);
  VecX sq = VecX::Zero(4);
  for (int i = 0; i < draws; ++i) {
    const VecX e = add_label_noise(y, 0.1, rng) - y;
    sum += e;
    sq += e.cwiseProduct(e);
  }
  const VecX mean = sum / draws;
  const VecX var = sq / draws - mean.cwiseProduct(mean);
  // five standard errors of the sample mean and variance
  CHECK(mean.cwiseAbs().maxCoeff() < 5.0 * 0.1 / std::sqrt(draws));
  CHECK((var.array() / 0.01 - 1.0).abs().maxCoeff() < 5.0 * std::sqrt(2.0 / draws));
  CHECK(add_label_noise(y, 0.0, rng) == y);
}
