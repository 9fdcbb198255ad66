#include "grasplab/payload_dae.hpp"

#include "grasplab/liegroup.hpp"

#include <cmath>
#include <sstream>

namespace grasplab {

void PayloadParams::validate() const {
  if (!(mass > 0.0)) throw ConfigError("payload mass must be positive");
  if ((inertia - inertia.transpose()).norm() > 1e-12 * (1.0 + inertia.norm())) {
    throw ConfigError("payload inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(inertia);
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("payload inertia must be positive definite");
  }
  if (attachments.empty()) throw ConfigError("payload needs attachment points");
}

PayloadDisturbanceField PayloadDisturbanceField::preset(AgentDisturbanceField::Preset p,
                                                        double scale) {
  using P = AgentDisturbanceField::Preset;
  PayloadDisturbanceField f;
  if (p == P::Drag || p == P::DragBias) {
    f.drag = Vec3(0.5, 0.5, 0.3) * scale;
    f.angular_drag = Vec3::Constant(0.005) * scale;
  }
  if (p == P::Bias || p == P::DragBias) {
    f.force_bias = Vec3(-0.6, 0.5, -0.9) * scale;
    f.torque_bias = Vec3(0.015, 0.02, -0.01) * scale;
  }
  return f;
}

Vec6 PayloadDisturbanceField::evaluate(const PayloadState& state) const {
  Vec6 w;
  w.head<3>() = force_bias - drag.cwiseProduct(state.v);
  w.tail<3>() = torque_bias - angular_drag.cwiseProduct(state.omega);
  return w;
}

Vec6 contact_wrench_body(const PayloadParams& params, const PayloadState& state,
                         const VecX& lambda) {
  Vec6 w = Vec6::Zero();
  for (std::size_t i = 0; i < params.attachments.size(); ++i) {
    const Vec3 l = lambda.segment<3>(3 * static_cast<int>(i));
    w.head<3>() += l;
    w.tail<3>() += params.attachments[i].cross(state.rot.transpose() * l);
  }
  return w;
}

namespace {

PayloadDerivative payload_body_rhs(const PayloadParams& params, const PayloadState& state,
                                   const Vec3& force, const Vec3& torque_body,
                                   const Vec6& disturbance, const Vec3& gravity) {
  PayloadDerivative d;
  d.p_dot = state.v;
  d.v_dot = gravity + (force + disturbance.head<3>()) / params.mass;
  d.rot_dot = state.rot * hat(state.omega);
  const Vec3 gyro = state.omega.cross(params.inertia * state.omega);
  d.omega_dot = params.inertia.ldlt().solve(torque_body + disturbance.tail<3>() - gyro);
  return d;
}

}  // namespace

PayloadDerivative payload_rhs(const PayloadParams& params, const PayloadState& state,
                              const VecX& lambda, const Vec6& disturbance, const Vec3& gravity) {
  const Vec6 w = contact_wrench_body(params, state, lambda);
  return payload_body_rhs(params, state, w.head<3>(), w.tail<3>(), disturbance, gravity);
}

PayloadDerivative payload_rhs_wrench(const PayloadParams& params, const PayloadState& state,
                                     const Vec6& wrench_inertial, const Vec6& disturbance,
                                     const Vec3& gravity) {
  return payload_body_rhs(params, state, wrench_inertial.head<3>(),
                          state.rot.transpose() * wrench_inertial.tail<3>(), disturbance,
                          gravity);
}

PayloadState advance(const PayloadState& s, const PayloadDerivative& d, double h) {
  PayloadState out;
  out.p = s.p + h * d.p_dot;
  out.v = s.v + h * d.v_dot;
  out.rot = s.rot + h * d.rot_dot;
  out.omega = s.omega + h * d.omega_dot;
  return out;
}

MatX grasp_matrix(const Rotation& r_l, const std::vector<Vec3>& attachments) {
  const int k = static_cast<int>(attachments.size());
  MatX g = MatX::Zero(6, 3 * k);
  for (int i = 0; i < k; ++i) {
    g.block<3, 3>(0, 3 * i).setIdentity();
    g.block<3, 3>(3, 3 * i) = hat(r_l * attachments[i]);
  }
  return g;
}

int CoupledState::differential_dimension() const {
  int n = 12;  // payload
  for (const auto& a : agents) n += 12 + 2 * static_cast<int>(a.r.size());
  return n;
}

Disturbances Disturbances::none(int agents, int joints) {
  Disturbances d;
  d.agents.assign(agents, AgentDisturbanceField::preset(AgentDisturbanceField::Preset::Zero,
                                                        joints));
  return d;
}

namespace {

struct AgentStep {
  AgentState state;
  AgentDerivative d;
};

AgentState advance_agent(const AgentState& s, const AgentDerivative& d, double h) {
  AgentState out = s;
  out.rot = s.rot + h * d.rot_dot;
  out.x = s.x + h * d.x_dot;
  out.r = s.r + h * d.r_dot;
  out.v = s.v + h * d.v_dot;
  out.mu = s.mu + h * d.mu_dot;
  out.nu = s.nu + h * d.nu_dot;
  return out;
}

AgentDerivative combine(const AgentDerivative& a, const AgentDerivative& b,
                        const AgentDerivative& c, const AgentDerivative& d) {
  AgentDerivative o;
  o.rot_dot = (a.rot_dot + 2.0 * b.rot_dot + 2.0 * c.rot_dot + d.rot_dot) / 6.0;
  o.x_dot = (a.x_dot + 2.0 * b.x_dot + 2.0 * c.x_dot + d.x_dot) / 6.0;
  o.r_dot = (a.r_dot + 2.0 * b.r_dot + 2.0 * c.r_dot + d.r_dot) / 6.0;
  o.v_dot = (a.v_dot + 2.0 * b.v_dot + 2.0 * c.v_dot + d.v_dot) / 6.0;
  o.mu_dot = (a.mu_dot + 2.0 * b.mu_dot + 2.0 * c.mu_dot + d.mu_dot) / 6.0;
  o.nu_dot = (a.nu_dot + 2.0 * b.nu_dot + 2.0 * c.nu_dot + d.nu_dot) / 6.0;
  return o;
}

PayloadDerivative combine(const PayloadDerivative& a, const PayloadDerivative& b,
                          const PayloadDerivative& c, const PayloadDerivative& d) {
  PayloadDerivative o;
  o.p_dot = (a.p_dot + 2.0 * b.p_dot + 2.0 * c.p_dot + d.p_dot) / 6.0;
  o.v_dot = (a.v_dot + 2.0 * b.v_dot + 2.0 * c.v_dot + d.v_dot) / 6.0;
  o.rot_dot = (a.rot_dot + 2.0 * b.rot_dot + 2.0 * c.rot_dot + d.rot_dot) / 6.0;
  o.omega_dot = (a.omega_dot + 2.0 * b.omega_dot + 2.0 * c.omega_dot + d.omega_dot) / 6.0;
  return o;
}

}  // namespace

CoupledSystem::CoupledSystem(std::vector<AgentParams> agents, PayloadParams payload,
                             Vec3 gravity, double baumgarte_alpha)
    : agents_(std::move(agents)),
      payload_(std::move(payload)),
      gravity_(gravity),
      alpha_(baumgarte_alpha) {
  if (agents_.empty()) throw ConfigError("at least one agent is required");
  for (const auto& a : agents_) a.validate();
  payload_.validate();
  arms_ = agents_.front().joint_count();
  for (const auto& a : agents_) {
    if (a.joint_count() != arms_) throw ConfigError("all agents must have the same arm count");
  }
  if (static_cast<int>(payload_.attachments.size()) != contact_count()) {
    throw ConfigError("attachment count must equal agents x arms");
  }
  if (!(alpha_ >= 0.0)) throw ConfigError("stabilization gain must be nonnegative");
}

int CoupledSystem::velocity_dimension() const {
  return agent_count() * (6 + joints()) + 6;
}

VecX CoupledSystem::grasp_constraints(const CoupledState& z) const {
  VecX phi(3 * contact_count());
  const PayloadState& pl = z.payload;
  for (int j = 0; j < agent_count(); ++j) {
    for (int b = 0; b < arms_; ++b) {
      const int i = j * arms_ + b;
      phi.segment<3>(3 * i) = contact_point(agents_[j], z.agents[j], b) -
                              (pl.p + pl.rot * payload_.attachments[i]);
    }
  }
  return phi;
}

VecX CoupledSystem::velocities(const CoupledState& z) const {
  VecX v(velocity_dimension());
  const int n = joints();
  for (int j = 0; j < agent_count(); ++j) {
    const int o = agent_velocity_offset(j);
    v.segment<3>(o) = z.agents[j].omega;
    v.segment<3>(o + 3) = z.agents[j].v;
    v.segment(o + 6, n) = z.agents[j].rdot;
  }
  const int o = payload_velocity_offset();
  v.segment<3>(o) = z.payload.v;
  v.segment<3>(o + 3) = z.payload.omega;
  return v;
}

ConstraintJacobian CoupledSystem::constraint_jacobian(const CoupledState& z) const {
  const int n = joints();
  const int rows = 3 * contact_count();
  ConstraintJacobian out;
  out.jacobian = MatX::Zero(rows, velocity_dimension());
  out.bias = VecX::Zero(rows);
  const PayloadState& pl = z.payload;
  const int po = payload_velocity_offset();
  const Vec3 wl = pl.omega;
  for (int j = 0; j < agent_count(); ++j) {
    const AgentParams& ap = agents_[j];
    const AgentState& s = z.agents[j];
    const double m = ap.total_mass();
    const int o = agent_velocity_offset(j);
    // joint-space curvature of the CoM, shared by every contact of this agent
    Vec3 com_curv = Vec3::Zero();
    for (int k = 0; k < n; ++k) {
      com_curv += ap.arms[k].link_mass * link_curvature(ap.arms[k], s.r(k)) * s.rdot(k) *
                  s.rdot(k) / m;
    }
    for (int b = 0; b < arms_; ++b) {
      const int i = j * arms_ + b;
      const Vec3 d = contact_offset(ap, s.r, b);
      const MatX dj = contact_offset_jacobian(ap, s.r, b);
      const Vec3 c = payload_.attachments[i];
      auto rows_i = out.jacobian.middleRows(3 * i, 3);
      rows_i.block<3, 3>(0, o) = -s.rot * hat(d);
      rows_i.block<3, 3>(0, o + 3).setIdentity();
      rows_i.block(0, o + 6, 3, n) = s.rot * dj;
      rows_i.block<3, 3>(0, po) = -Mat3::Identity();
      rows_i.block<3, 3>(0, po + 3) = pl.rot * hat(c);

      const Vec3 d_dot = dj * s.rdot;
      const Vec3 h = link_curvature(ap.arms[b], s.r(b)) * s.rdot(b) * s.rdot(b) - com_curv;
      const Vec3 w = s.omega;
      out.bias.segment<3>(3 * i) =
          s.rot * (w.cross(w.cross(d)) + 2.0 * w.cross(d_dot) + h) -
          pl.rot * wl.cross(wl.cross(c));
    }
  }
  return out;
}

VecX CoupledSystem::constraint_velocity(const CoupledState& z) const {
  return constraint_jacobian(z).jacobian * velocities(z);
}

CoupledSystem::Assembly CoupledSystem::assemble(const CoupledState& z,
                                                const std::vector<AgentInput>& inputs,
                                                const Disturbances& dist) const {
  Assembly a;
  a.agent_mass.reserve(agent_count());
  for (int j = 0; j < agent_count(); ++j) {
    const AgentWrench w = dist.agents.empty() ? AgentWrench::zero(joints())
                                              : dist.agents[j].evaluate(z.agents[j]);
    VelocityDynamics vd = agent_velocity_dynamics(agents_[j], z.agents[j], inputs[j], w, gravity_);
    a.agent_mass.emplace_back(vd.mass);
    if (a.agent_mass.back().info() != Eigen::Success) {
      throw SolverError("agent mass matrix is not positive definite");
    }
    a.agent_force.push_back(std::move(vd.force));
  }
  const PayloadState& pl = z.payload;
  const Vec6 fd = dist.payload.evaluate(pl);
  a.payload_force.head<3>() = payload_.mass * gravity_ + fd.head<3>();
  a.payload_force.tail<3>() = fd.tail<3>() - pl.omega.cross(payload_.inertia * pl.omega);
  return a;
}

MatX CoupledSystem::apply_inverse_mass(const CoupledState&, const Assembly& a,
                                       const MatX& rhs) const {
  MatX out(rhs.rows(), rhs.cols());
  const int na = 6 + joints();
  for (int j = 0; j < agent_count(); ++j) {
    out.middleRows(agent_velocity_offset(j), na) =
        a.agent_mass[j].solve(rhs.middleRows(agent_velocity_offset(j), na));
  }
  const int po = payload_velocity_offset();
  out.middleRows(po, 3) = rhs.middleRows(po, 3) / payload_.mass;
  out.middleRows(po + 3, 3) = payload_.inertia.ldlt().solve(rhs.middleRows(po + 3, 3));
  return out;
}

VecX CoupledSystem::apply_inverse_mass(const CoupledState& z, const Assembly& a,
                                       const VecX& rhs) const {
  return apply_inverse_mass(z, a, MatX(rhs)).col(0);
}

namespace {

VecX stacked_force(const CoupledSystem& sys, const std::vector<VecX>& agent_force,
                   const Vec6& payload_force) {
  VecX q(sys.velocity_dimension());
  const int na = 6 + sys.joints();
  for (int j = 0; j < sys.agent_count(); ++j) {
    q.segment(sys.agent_velocity_offset(j), na) = agent_force[j];
  }
  q.segment<6>(sys.payload_velocity_offset()) = payload_force;
  return q;
}

}  // namespace

ContactSolve CoupledSystem::solve_contact_forces(const CoupledState& z,
                                                 const std::vector<AgentInput>& inputs,
                                                 const Disturbances& dist) const {
  const Assembly a = assemble(z, inputs, dist);
  const ConstraintJacobian cj = constraint_jacobian(z);
  const VecX q = stacked_force(*this, a.agent_force, a.payload_force);
  const VecX vel = velocities(z);
  const VecX phi = grasp_constraints(z);
  const VecX phi_dot = cj.jacobian * vel;

  // Phi'' = J M^{-1}(Q - J^T lambda) + b
  const MatX minv_jt = apply_inverse_mass(z, a, MatX(cj.jacobian.transpose()));
  const MatX k = cj.jacobian * minv_jt;
  const VecX rhs = cj.jacobian * apply_inverse_mass(z, a, q) + cj.bias +
                   2.0 * alpha_ * phi_dot + alpha_ * alpha_ * phi;

  ContactSolve out;
  Eigen::LLT<MatX> llt(k);
  if (llt.info() != Eigen::Success) {
    throw SolverError("singular grasp: constraint Jacobian lost row rank");
  }
  const double rcond = llt.rcond();
  out.condition_estimate = rcond > 0.0 ? 1.0 / rcond : INFINITY;
  if (out.condition_estimate > 1e12) {
    out.least_squares_fallback = true;
    out.lambda = k.completeOrthogonalDecomposition().solve(rhs);
  } else {
    out.lambda = llt.solve(rhs);
  }
  const double scale = std::max(rhs.norm(), 1e-300);
  out.relative_residual = (k * out.lambda - rhs).norm() / scale;
  return out;
}

VecX CoupledSystem::solve_contact_forces_dense(const CoupledState& z,
                                               const std::vector<AgentInput>& inputs,
                                               const Disturbances& dist) const {
  const int nv = velocity_dimension();
  const int nc = 3 * contact_count();
  const int na = 6 + joints();
  std::vector<VecX> forces;
  MatX mass = MatX::Zero(nv, nv);
  for (int j = 0; j < agent_count(); ++j) {
    const AgentWrench w = dist.agents.empty() ? AgentWrench::zero(joints())
                                              : dist.agents[j].evaluate(z.agents[j]);
    VelocityDynamics vd = agent_velocity_dynamics(agents_[j], z.agents[j], inputs[j], w, gravity_);
    mass.block(agent_velocity_offset(j), agent_velocity_offset(j), na, na) = vd.mass;
    forces.push_back(vd.force);
  }
  const int po = payload_velocity_offset();
  mass.block<3, 3>(po, po) = payload_.mass * Mat3::Identity();
  mass.block<3, 3>(po + 3, po + 3) = payload_.inertia;
  const PayloadState& pl = z.payload;
  const Vec6 fd = dist.payload.evaluate(pl);
  Vec6 fp;
  fp.head<3>() = payload_.mass * gravity_ + fd.head<3>();
  fp.tail<3>() = fd.tail<3>() - pl.omega.cross(payload_.inertia * pl.omega);

  const ConstraintJacobian cj = constraint_jacobian(z);
  const VecX phi = grasp_constraints(z);
  const VecX phi_dot = cj.jacobian * velocities(z);

  // [M  J^T; J  0] [acc; lambda] = [Q; -b - 2 a Phi' - a^2 Phi]
  MatX kkt = MatX::Zero(nv + nc, nv + nc);
  kkt.topLeftCorner(nv, nv) = mass;
  kkt.topRightCorner(nv, nc) = cj.jacobian.transpose();
  kkt.bottomLeftCorner(nc, nv) = cj.jacobian;
  VecX rhs(nv + nc);
  rhs.head(nv) = stacked_force(*this, forces, fp);
  rhs.tail(nc) = -cj.bias - 2.0 * alpha_ * phi_dot - alpha_ * alpha_ * phi;
  const VecX sol = kkt.fullPivLu().solve(rhs);
  return sol.tail(nc);
}

CoupledDerivative CoupledSystem::rhs(const CoupledState& z, const std::vector<AgentInput>& inputs,
                                     const Disturbances& dist, VecX* lambda_out) const {
  const ContactSolve cs = solve_contact_forces(z, inputs, dist);
  if (!cs.lambda.allFinite()) throw SolverError("non-finite contact forces");
  CoupledDerivative d;
  for (int j = 0; j < agent_count(); ++j) {
    std::vector<Vec3> f(arms_);
    for (int b = 0; b < arms_; ++b) f[b] = cs.lambda.segment<3>(3 * (j * arms_ + b));
    const AgentWrench w = dist.agents.empty() ? AgentWrench::zero(joints())
                                              : dist.agents[j].evaluate(z.agents[j]);
    d.agents.push_back(agent_rhs(agents_[j], z.agents[j], inputs[j], f, w, gravity_));
  }
  d.payload = payload_rhs(payload_, z.payload, cs.lambda, dist.payload.evaluate(z.payload),
                          gravity_);
  if (lambda_out) *lambda_out = cs.lambda;
  return d;
}

CoupledState CoupledSystem::step(const CoupledState& z, const std::vector<AgentInput>& inputs,
                                 const Disturbances& dist, double h,
                                 VecX* lambda_start) const {
  auto stage = [&](const CoupledState& base, const CoupledDerivative& d, double dt) {
    CoupledState s;
    s.agents.reserve(base.agents.size());
    for (int j = 0; j < agent_count(); ++j) {
      AgentState a = advance_agent(base.agents[j], d.agents[j], dt);
      a.sync_velocities(agents_[j]);
      s.agents.push_back(std::move(a));
    }
    s.payload = advance(base.payload, d.payload, dt);
    return s;
  };

  const CoupledDerivative k1 = rhs(z, inputs, dist, lambda_start);
  const CoupledDerivative k2 = rhs(stage(z, k1, 0.5 * h), inputs, dist);
  const CoupledDerivative k3 = rhs(stage(z, k2, 0.5 * h), inputs, dist);
  const CoupledDerivative k4 = rhs(stage(z, k3, h), inputs, dist);

  CoupledDerivative sum;
  for (int j = 0; j < agent_count(); ++j) {
    sum.agents.push_back(combine(k1.agents[j], k2.agents[j], k3.agents[j], k4.agents[j]));
  }
  sum.payload = combine(k1.payload, k2.payload, k3.payload, k4.payload);
  CoupledState out = stage(z, sum, h);

  for (int j = 0; j < agent_count(); ++j) {
    AgentState& a = out.agents[j];
    if (orthonormality_residual(a.rot) > 1e-9) a.rot = project_to_so3(a.rot);
  }
  if (orthonormality_residual(out.payload.rot) > 1e-9) {
    out.payload.rot = project_to_so3(out.payload.rot);
  }
  return out;
}

bool CoupledSystem::newton_positions(CoupledState& z, int max_iter, double tol) const {
  const int na = 6 + joints();
  const int cols = agent_count() * na;
  for (int it = 0; it <= max_iter; ++it) {
    const VecX phi = grasp_constraints(z);
    if (!phi.allFinite()) return false;
    if (phi.norm() < tol) return true;
    if (it == max_iter) break;
    const MatX jac = constraint_jacobian(z).jacobian.leftCols(cols);
    // minimum-norm Gauss-Newton step, weighted by the agents' mass metric
    MatX w_inv = MatX::Zero(cols, cols);
    for (int j = 0; j < agent_count(); ++j) {
      VelocityDynamics vd = agent_velocity_dynamics(agents_[j], z.agents[j],
                                                    AgentInput::zero(joints()),
                                                    AgentWrench::zero(joints()), gravity_);
      w_inv.block(j * na, j * na, na, na) = vd.mass.inverse();
    }
    const MatX jw = jac * w_inv;
    const VecX y = (jw * jac.transpose()).ldlt().solve(phi);
    const VecX delta = -w_inv * jac.transpose() * y;
    for (int j = 0; j < agent_count(); ++j) {
      AgentState& a = z.agents[j];
      const VecX dj = delta.segment(j * na, na);
      a.rot = project_to_so3(a.rot * exp_so3(dj.head<3>()));
      a.x += dj.segment<3>(3);
      a.r += dj.tail(joints());
    }
  }
  return false;
}

void CoupledSystem::project_velocities(CoupledState& z, bool agents_only) const {
  const int na = 6 + joints();
  const int nv = velocity_dimension();
  const int cols = agents_only ? agent_count() * na : nv;
  const MatX jac = constraint_jacobian(z).jacobian;
  const VecX vel = velocities(z);
  const VecX phi_dot = jac * vel;

  MatX w_inv = MatX::Zero(cols, cols);
  for (int j = 0; j < agent_count(); ++j) {
    VelocityDynamics vd = agent_velocity_dynamics(agents_[j], z.agents[j],
                                                  AgentInput::zero(joints()),
                                                  AgentWrench::zero(joints()), gravity_);
    w_inv.block(j * na, j * na, na, na) = vd.mass.inverse();
  }
  if (!agents_only) {
    const int po = payload_velocity_offset();
    w_inv.block<3, 3>(po, po) = Mat3::Identity() / payload_.mass;
    w_inv.block<3, 3>(po + 3, po + 3) = payload_.inertia.inverse();
  }
  const MatX j_sub = jac.leftCols(cols);
  const VecX y = (j_sub * w_inv * j_sub.transpose()).ldlt().solve(phi_dot);
  const VecX delta = -w_inv * j_sub.transpose() * y;

  for (int j = 0; j < agent_count(); ++j) {
    AgentState& a = z.agents[j];
    const int o = agent_velocity_offset(j);
    a.omega += delta.segment<3>(o);
    a.v += delta.segment<3>(o + 3);
    a.rdot += delta.segment(o + 6, joints());
    a.sync_momenta(agents_[j]);
  }
  if (!agents_only) {
    const int po = payload_velocity_offset();
    z.payload.v += delta.segment<3>(po);
    z.payload.omega += delta.segment<3>(po + 3);
  }
}

void CoupledSystem::project(CoupledState& z) const {
  if (!newton_positions(z, 10, 1e-13)) {
    throw SolverError("constraint projection did not converge");
  }
  project_velocities(z, false);
}

CoupledState CoupledSystem::consistent_init(const CoupledState& guess) const {
  CoupledState z = guess;
  if (static_cast<int>(z.agents.size()) != agent_count()) {
    throw ConfigError("state has the wrong number of agents");
  }
  for (int j = 0; j < agent_count(); ++j) {
    AgentState& a = z.agents[j];
    if (a.r.size() != joints()) a.r = VecX::Zero(joints());
    if (a.rdot.size() != joints()) a.rdot = VecX::Zero(joints());
    if (a.nu.size() != joints()) a.nu = VecX::Zero(joints());
  }
  const double tol = 1e-11;
  if (!newton_positions(z, 50, tol)) {
    std::ostringstream os;
    os << "infeasible grasp geometry: Newton did not converge in 50 iterations (|phi| = "
       << grasp_constraints(z).norm() << ")";
    throw SolverError(os.str());
  }
  if (constraint_velocity(z).norm() >= tol) project_velocities(z, true);
  for (int j = 0; j < agent_count(); ++j) z.agents[j].sync_momenta(agents_[j]);
  return z;
}

double CoupledSystem::total_energy(const CoupledState& z) const {
  double e = 0.0;
  for (int j = 0; j < agent_count(); ++j) e += agent_energy(agents_[j], z.agents[j], gravity_);
  const PayloadState& pl = z.payload;
  e += 0.5 * payload_.mass * pl.v.squaredNorm() +
       0.5 * pl.omega.dot(payload_.inertia * pl.omega) - payload_.mass * gravity_.dot(pl.p);
  return e;
}

Vec3 CoupledSystem::total_linear_momentum(const CoupledState& z) const {
  Vec3 p = payload_.mass * z.payload.v;
  for (int j = 0; j < agent_count(); ++j) p += agents_[j].total_mass() * z.agents[j].v;
  return p;
}

}  // namespace grasplab
