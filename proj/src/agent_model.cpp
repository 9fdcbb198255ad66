#include "grasplab/agent_model.hpp"

#include "grasplab/liegroup.hpp"

#include <cmath>

namespace grasplab {

namespace {

Mat3 joint_rotation(const ArmModel& arm, double r) {
  return Eigen::AngleAxisd(r, arm.axis).toRotationMatrix();
}

// Split a (3 + n) square matrix into the (w, rdot) ordering used by Mbar.
MatX velocity_mass(const MatX& mbar, double total_mass) {
  const int n = static_cast<int>(mbar.rows()) - 3;
  MatX m = MatX::Zero(6 + n, 6 + n);
  m.block(0, 0, 3, 3) = mbar.block(0, 0, 3, 3);
  m.block(0, 6, 3, n) = mbar.block(0, 3, 3, n);
  m.block(6, 0, n, 3) = mbar.block(3, 0, n, 3);
  m.block(6, 6, n, n) = mbar.block(3, 3, n, n);
  m.block(3, 3, 3, 3) = total_mass * Mat3::Identity();
  return m;
}

}  // namespace

double AgentParams::total_mass() const {
  double m = base_mass;
  for (const auto& a : arms) m += a.link_mass;
  return m;
}

void AgentParams::validate() const {
  if (!(base_mass > 0.0)) throw ConfigError("agent base mass must be positive");
  Eigen::SelfAdjointEigenSolver<Mat3> eig(0.5 * (base_inertia + base_inertia.transpose()));
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("agent base inertia must be positive definite");
  }
  if (arms.empty()) throw ConfigError("agent needs at least one arm");
  for (const auto& a : arms) {
    if (!(a.link_mass > 0.0)) throw ConfigError("arm link mass must be positive");
    if (!(a.link_length > 0.0)) throw ConfigError("arm link length must be positive");
    if (std::abs(a.axis.norm() - 1.0) > 1e-9) throw ConfigError("arm joint axis must be unit");
    if (std::abs(a.rest_direction.norm() - 1.0) > 1e-9) {
      throw ConfigError("arm rest direction must be unit");
    }
  }
}

MatX MassBlocks::assemble() const {
  const int n = joint_count();
  MatX m(6 + n, 6 + n);
  m.block(0, 0, 3, 3) = inertia;
  m.block(0, 3, 3, 3) = coupling.transpose();
  m.block(0, 6, 3, n) = omega_joint;
  m.block(3, 0, 3, 3) = coupling;
  m.block(3, 3, 3, 3) = total_mass * Mat3::Identity();
  m.block(3, 6, 3, n) = vel_joint;
  m.block(6, 0, n, 3) = omega_joint.transpose();
  m.block(6, 3, n, 3) = vel_joint.transpose();
  m.block(6, 6, n, n) = joint_joint;
  return m;
}

Vec3 link_position(const ArmModel& arm, double r) {
  return arm.mount + arm.link_length * (joint_rotation(arm, r) * arm.rest_direction);
}

Vec3 link_tangent(const ArmModel& arm, double r) {
  return arm.link_length * arm.axis.cross(joint_rotation(arm, r) * arm.rest_direction);
}

Vec3 link_curvature(const ArmModel& arm, double r) {
  const Vec3 q = joint_rotation(arm, r) * arm.rest_direction;
  return arm.link_length * arm.axis.cross(arm.axis.cross(q));
}

namespace {

MassBlocks compute_blocks(const AgentParams& params, const VecX& r) {
  const int n = params.joint_count();
  MassBlocks b;
  b.total_mass = params.total_mass();
  b.inertia = params.base_inertia;
  b.omega_joint = MatX::Zero(3, n);
  b.vel_joint = MatX::Zero(3, n);
  b.joint_joint = MatX::Zero(n, n);
  Vec3 first_moment = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    const ArmModel& arm = params.arms[k];
    const Vec3 s = link_position(arm, r(k));
    const Vec3 ds = link_tangent(arm, r(k));
    const Mat3 hs = hat(s);
    first_moment += arm.link_mass * s;
    b.inertia += arm.link_mass * hs.transpose() * hs;
    b.omega_joint.col(k) = arm.link_mass * hs * ds;
    b.vel_joint.col(k) = arm.link_mass * ds;
    b.joint_joint(k, k) = arm.link_mass * ds.squaredNorm();
  }
  b.coupling = -hat(first_moment);
  return b;
}

}  // namespace

MassBlocks mass_matrix(const AgentParams& params, const VecX& r) {
  MassBlocks b = compute_blocks(params, r);
  Eigen::SelfAdjointEigenSolver<MatX> eig(b.assemble());
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw ConfigError("mass matrix M0(r) is not positive definite");
  }
  return b;
}

MatX reduced_mass_matrix(const MassBlocks& blocks) {
  const int n = blocks.joint_count();
  MatX a(3 + n, 3 + n);
  a.block(0, 0, 3, 3) = blocks.inertia;
  a.block(0, 3, 3, n) = blocks.omega_joint;
  a.block(3, 0, n, 3) = blocks.omega_joint.transpose();
  a.block(3, 3, n, n) = blocks.joint_joint;
  MatX coupling(3, 3 + n);
  coupling << blocks.coupling, blocks.vel_joint;
  MatX mbar = a - coupling.transpose() * coupling / blocks.total_mass;
  return 0.5 * (mbar + mbar.transpose());
}

MatX reduced_mass_matrix(const AgentParams& params, const VecX& r) {
  return reduced_mass_matrix(compute_blocks(params, r));
}

MatX reduced_mass_derivative(const AgentParams& params, const VecX& r, int k) {
  const int n = params.joint_count();
  const double m = params.total_mass();
  const ArmModel& arm = params.arms[k];
  const double mk = arm.link_mass;
  const Vec3 s = link_position(arm, r(k));
  const Vec3 ds = link_tangent(arm, r(k));
  const Vec3 dds = link_curvature(arm, r(k));

  MatX da = MatX::Zero(3 + n, 3 + n);
  da.block(0, 0, 3, 3) = mk * (hat(ds).transpose() * hat(s) + hat(s).transpose() * hat(ds));
  const Vec3 dcol = mk * hat(s) * dds;
  da.block(0, 3 + k, 3, 1) = dcol;
  da.block(3 + k, 0, 1, 3) = dcol.transpose();
  da(3 + k, 3 + k) = 2.0 * mk * ds.dot(dds);

  const MassBlocks blocks = compute_blocks(params, r);
  MatX coupling(3, 3 + n);
  coupling << blocks.coupling, blocks.vel_joint;
  MatX dcoupling = MatX::Zero(3, 3 + n);
  dcoupling.block(0, 0, 3, 3) = -mk * hat(ds);
  dcoupling.col(3 + k) = mk * dds;

  return da - (dcoupling.transpose() * coupling + coupling.transpose() * dcoupling) / m;
}

MatX reduced_mass_derivative_fd(const AgentParams& params, const VecX& r, int k, double step) {
  VecX rp = r;
  VecX rm = r;
  rp(k) += step;
  rm(k) -= step;
  return (reduced_mass_matrix(params, rp) - reduced_mass_matrix(params, rm)) / (2.0 * step);
}

Vec3 com_offset(const AgentParams& params, const VecX& r) {
  Vec3 first_moment = Vec3::Zero();
  for (int k = 0; k < params.joint_count(); ++k) {
    first_moment += params.arms[k].link_mass * link_position(params.arms[k], r(k));
  }
  return first_moment / params.total_mass();
}

Vec3 com_shift_velocity(const MassBlocks& blocks, const Vec3& omega, const VecX& rdot,
                        const Vec3& v0) {
  return v0 + (blocks.vel_joint * rdot + blocks.coupling * omega) / blocks.total_mass;
}

AgentState AgentState::at_rest(int joints) {
  AgentState s;
  s.r = VecX::Zero(joints);
  s.rdot = VecX::Zero(joints);
  s.nu = VecX::Zero(joints);
  return s;
}

VecX AgentState::xi_bar() const {
  VecX xi(3 + rdot.size());
  xi << omega, rdot;
  return xi;
}

void AgentState::sync_velocities(const AgentParams& params) {
  const MatX mbar = reduced_mass_matrix(params, r);
  VecX p(3 + nu.size());
  p << mu, nu;
  const VecX xi = mbar.llt().solve(p);
  omega = xi.head<3>();
  rdot = xi.tail(nu.size());
}

void AgentState::sync_momenta(const AgentParams& params) {
  const VecX p = reduced_mass_matrix(params, r) * xi_bar();
  mu = p.head<3>();
  nu = p.tail(rdot.size());
}

double AgentState::momentum_residual(const AgentParams& params) const {
  const VecX p = reduced_mass_matrix(params, r) * xi_bar();
  VecX stored(3 + nu.size());
  stored << mu, nu;
  return (p - stored).norm();
}

AgentInput AgentInput::zero(int joints) {
  AgentInput in;
  in.joint_torque = VecX::Zero(joints);
  return in;
}

AgentWrench AgentWrench::zero(int joints) {
  AgentWrench w;
  w.joint = VecX::Zero(joints);
  return w;
}

VecX AgentWrench::stacked() const {
  VecX y(6 + joint.size());
  y << force, torque, joint;
  return y;
}

AgentDisturbanceField AgentDisturbanceField::preset(Preset p, int joints, double scale) {
  AgentDisturbanceField f;
  f.joint_bias = VecX::Zero(joints);
  const bool drag = p == Preset::Drag || p == Preset::DragBias;
  const bool bias = p == Preset::Bias || p == Preset::DragBias;
  if (drag) {
    f.drag = Vec3(0.6, 0.6, 0.3) * scale;
    f.angular_drag = Vec3::Constant(0.01) * scale;
    f.joint_drag = 0.005 * scale;
  }
  if (bias) {
    f.force_bias = Vec3(0.8, -0.6, -1.0) * scale;
    f.torque_bias = Vec3(0.02, -0.015, 0.01) * scale;
    f.joint_bias = VecX::Constant(joints, 0.01 * scale);
  }
  return f;
}

AgentDisturbanceField::Preset AgentDisturbanceField::parse_preset(const std::string& name) {
  if (name == "zero") return Preset::Zero;
  if (name == "drag") return Preset::Drag;
  if (name == "bias") return Preset::Bias;
  if (name == "drag_bias") return Preset::DragBias;
  throw ConfigError("unknown disturbance preset '" + name + "'");
}

AgentWrench AgentDisturbanceField::evaluate(const AgentState& state) const {
  AgentWrench w;
  w.force = force_bias - drag.cwiseProduct(state.v);
  w.torque = torque_bias - angular_drag.cwiseProduct(state.omega);
  w.joint = -joint_drag * state.rdot;
  if (joint_bias.size() == state.rdot.size()) w.joint += joint_bias;
  return w;
}

Vec3 contact_offset(const AgentParams& params, const VecX& r, int b) {
  return link_position(params.arms[b], r(b)) - com_offset(params, r);
}

MatX contact_offset_jacobian(const AgentParams& params, const VecX& r, int b) {
  const int n = params.joint_count();
  const double m = params.total_mass();
  MatX d(3, n);
  for (int k = 0; k < n; ++k) {
    d.col(k) = -params.arms[k].link_mass * link_tangent(params.arms[k], r(k)) / m;
  }
  d.col(b) += link_tangent(params.arms[b], r(b));
  return d;
}

Vec3 contact_point(const AgentParams& params, const AgentState& state, int b) {
  return state.x + state.rot * contact_offset(params, state.r, b);
}

MatX contact_jacobian(const AgentParams& params, const AgentState& state, int b) {
  const int n = params.joint_count();
  const Vec3 d = contact_offset(params, state.r, b);
  const MatX dj = contact_offset_jacobian(params, state.r, b);
  MatX jt(3 + n, 3);
  jt.topRows(3) = hat(d) * state.rot.transpose();
  jt.bottomRows(n) = dj.transpose() * state.rot.transpose();
  return jt;
}

VecX quadratic_mass_term(const AgentParams& params, const VecX& r, const VecX& xi_bar) {
  const int n = params.joint_count();
  VecX q = VecX::Zero(3 + n);
  for (int k = 0; k < n; ++k) {
    q(3 + k) = 0.5 * xi_bar.dot(reduced_mass_derivative(params, r, k) * xi_bar);
  }
  return q;
}

VelocityDynamics agent_velocity_dynamics(const AgentParams& params, const AgentState& state,
                                         const AgentInput& input,
                                         const AgentWrench& disturbance, const Vec3& gravity) {
  const int n = params.joint_count();
  const MassBlocks blocks = compute_blocks(params, state.r);
  const MatX mbar = reduced_mass_matrix(blocks);
  const double m = blocks.total_mass;
  const VecX xi = state.xi_bar();

  VecX mbar_dot_xi = VecX::Zero(3 + n);
  VecX quad = VecX::Zero(3 + n);
  for (int k = 0; k < n; ++k) {
    const MatX dm = reduced_mass_derivative(params, state.r, k);
    const VecX dm_xi = dm * xi;
    mbar_dot_xi += state.rdot(k) * dm_xi;
    quad(3 + k) = 0.5 * xi.dot(dm_xi);
  }

  const Vec3 e3 = Vec3::UnitZ();
  const Vec3 mu_dot = state.mu.cross(state.omega) + input.torque -
                      blocks.coupling.transpose() * e3 * input.thrust / m + disturbance.torque;
  const VecX nu_dot = quad.tail(n) + input.joint_torque -
                      blocks.vel_joint.transpose() * e3 * input.thrust / m + disturbance.joint;

  VelocityDynamics out;
  out.mass = velocity_mass(mbar, m);
  out.force = VecX(6 + n);
  out.force.segment<3>(0) = mu_dot - mbar_dot_xi.head<3>();
  out.force.segment<3>(3) = m * gravity + state.rot * e3 * input.thrust + disturbance.force;
  out.force.segment(6, n) = nu_dot - mbar_dot_xi.tail(n);
  return out;
}

AgentDerivative agent_rhs(const AgentParams& params, const AgentState& state,
                          const AgentInput& input, const std::vector<Vec3>& contact_forces,
                          const AgentWrench& disturbance, const Vec3& gravity) {
  const int n = params.joint_count();
  const MassBlocks blocks = compute_blocks(params, state.r);
  const double m = blocks.total_mass;
  const Vec3 e3 = Vec3::UnitZ();
  const VecX xi = state.xi_bar();

  Vec3 contact_sum = Vec3::Zero();
  VecX generalized = VecX::Zero(3 + n);
  for (int b = 0; b < static_cast<int>(contact_forces.size()); ++b) {
    contact_sum += contact_forces[b];
    generalized += contact_jacobian(params, state, b) * contact_forces[b];
  }

  AgentDerivative d;
  d.rot_dot = state.rot * hat(state.omega);
  d.x_dot = state.v;
  d.r_dot = state.rdot;
  // f^c_x(lambda) = -sum_b lambda_b: reaction of the forces applied to the payload.
  d.v_dot = gravity + (state.rot * e3 * input.thrust + disturbance.force - contact_sum) / m;
  d.mu_dot = state.mu.cross(state.omega) + input.torque -
             blocks.coupling.transpose() * e3 * input.thrust / m + disturbance.torque -
             generalized.head<3>();
  d.nu_dot = quadratic_mass_term(params, state.r, xi).tail(n) + input.joint_torque -
             blocks.vel_joint.transpose() * e3 * input.thrust / m + disturbance.joint -
             generalized.tail(n);
  return d;
}

double agent_energy(const AgentParams& params, const AgentState& state, const Vec3& gravity) {
  const double m = params.total_mass();
  const VecX xi = state.xi_bar();
  return 0.5 * m * state.v.squaredNorm() +
         0.5 * xi.dot(reduced_mass_matrix(params, state.r) * xi) - m * gravity.dot(state.x);
}

double agent_input_power(const AgentParams& params, const AgentState& state,
                         const AgentInput& input) {
  const double m = params.total_mass();
  const Vec3 c = com_offset(params, state.r);
  Vec3 c_dot = Vec3::Zero();
  for (int k = 0; k < params.joint_count(); ++k) {
    c_dot += params.arms[k].link_mass * link_tangent(params.arms[k], state.r(k)) *
             state.rdot(k) / m;
  }
  const Vec3 base_velocity = state.v - state.rot * (state.omega.cross(c) + c_dot);
  return input.thrust * (state.rot * Vec3::UnitZ()).dot(base_velocity) +
         input.torque.dot(state.omega) + input.joint_torque.dot(state.rdot);
}

}  // namespace grasplab
