#pragma once

#include "grasplab/types.hpp"

#include <string>
#include <vector>

namespace grasplab {

/// One single-revolute-joint arm carrying a point-mass link. The link tip
/// (where the mass sits) is the rigid contact with the payload.
struct ArmModel {
  double link_mass = 0.1;
  double link_length = 0.3;
  Vec3 mount = Vec3::Zero();             // joint location, base body frame
  Vec3 axis = Vec3::UnitX();             // joint axis, base body frame
  Vec3 rest_direction = -Vec3::UnitZ();  // link direction at r = 0
};

struct AgentParams {
  double base_mass = 1.0;
  Mat3 base_inertia = Mat3::Identity() * 0.01;
  std::vector<ArmModel> arms;

  int joint_count() const { return static_cast<int>(arms.size()); }
  double total_mass() const;
  /// Throws ConfigError on non-positive masses/lengths or non-unit axes.
  void validate() const;
};

/// Blocks of the base-coordinate mass matrix M0(r), velocity order (w, v0, rdot),
/// with w and v0 in the base body frame.
struct MassBlocks {
  Mat3 inertia;      // J(r)
  Mat3 coupling;     // C(r), row v0 / column w
  MatX omega_joint;  // M_{w rdot}(r), 3 x n_r
  MatX vel_joint;    // M_{v rdot}(r), 3 x n_r
  MatX joint_joint;  // M_{rdot rdot}(r), n_r x n_r
  double total_mass = 0.0;

  int joint_count() const { return static_cast<int>(vel_joint.cols()); }
  MatX assemble() const;
};

/// Position of link b's point mass in the base frame, and its first/second
/// derivatives with respect to r_b.
Vec3 link_position(const ArmModel& arm, double r);
Vec3 link_tangent(const ArmModel& arm, double r);
Vec3 link_curvature(const ArmModel& arm, double r);

MassBlocks mass_matrix(const AgentParams& params, const VecX& r);

/// Schur complement of the m I3 block: inertia about the moving center of mass.
MatX reduced_mass_matrix(const MassBlocks& blocks);
MatX reduced_mass_matrix(const AgentParams& params, const VecX& r);

/// d Mbar / d r_k, closed form.
MatX reduced_mass_derivative(const AgentParams& params, const VecX& r, int k);
/// d Mbar / d r_k by central differences.
MatX reduced_mass_derivative_fd(const AgentParams& params, const VecX& r, int k,
                                double step = 1e-6);

/// Center of mass offset from the base center, base frame.
Vec3 com_offset(const AgentParams& params, const VecX& r);

/// v = v0 + (M_{v rdot} rdot + C w) / m (all body frame).
Vec3 com_shift_velocity(const MassBlocks& blocks, const Vec3& omega, const VecX& rdot,
                        const Vec3& v0);

/// Reduced agent state. x is the inertial center of mass and v its inertial
/// velocity; w is the base body rate. (mu, nu) = Mbar(r) (w, rdot).
struct AgentState {
  Rotation rot = Rotation::Identity();
  Vec3 x = Vec3::Zero();
  VecX r;
  Vec3 omega = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  VecX rdot;
  Vec3 mu = Vec3::Zero();
  VecX nu;

  static AgentState at_rest(int joints);
  VecX xi_bar() const;
  /// Recompute (w, rdot) from (mu, nu).
  void sync_velocities(const AgentParams& params);
  /// Recompute (mu, nu) from (w, rdot).
  void sync_momenta(const AgentParams& params);
  double momentum_residual(const AgentParams& params) const;
};

struct AgentInput {
  double thrust = 0.0;           // u >= 0, along R e3
  Vec3 torque = Vec3::Zero();    // base torque, body frame
  VecX joint_torque;             // tau_r

  static AgentInput zero(int joints);
};

/// Generalized disturbance on the (x, mu, nu) channels.
struct AgentWrench {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  VecX joint;

  static AgentWrench zero(int joints);
  VecX stacked() const;
};

/// Ground-truth agent disturbance: linear drag plus constant bias per channel.
struct AgentDisturbanceField {
  Vec3 drag = Vec3::Zero();          // f^x += -diag(drag) v
  Vec3 force_bias = Vec3::Zero();
  Vec3 angular_drag = Vec3::Zero();  // f^w += -diag(angular_drag) w
  Vec3 torque_bias = Vec3::Zero();
  double joint_drag = 0.0;           // f^rdot += -joint_drag rdot
  VecX joint_bias;

  enum class Preset { Zero, Drag, Bias, DragBias };
  static AgentDisturbanceField preset(Preset p, int joints, double scale = 1.0);
  static Preset parse_preset(const std::string& name);

  AgentWrench evaluate(const AgentState& state) const;
};

/// Inertial contact point of arm b: x + R (s_b(r) - c(r)).
Vec3 contact_point(const AgentParams& params, const AgentState& state, int b);

/// Base-frame offset d_b = s_b - c and its joint Jacobian D_b (3 x n_r).
Vec3 contact_offset(const AgentParams& params, const VecX& r, int b);
MatX contact_offset_jacobian(const AgentParams& params, const VecX& r, int b);

/// J_{c,b}^T, (3 + n_r) x 3: maps a contact force (inertial) to generalized
/// forces on the (mu, nu) channels. Rows follow (w, rdot) stacking.
MatX contact_jacobian(const AgentParams& params, const AgentState& state, int b);

/// 1/2 xi^T dMbar/dr_k xi on the nu rows, zero on the mu rows.
VecX quadratic_mass_term(const AgentParams& params, const VecX& r, const VecX& xi_bar);

struct AgentDerivative {
  Mat3 rot_dot = Mat3::Zero();
  Vec3 x_dot = Vec3::Zero();
  VecX r_dot;
  Vec3 v_dot = Vec3::Zero();
  Vec3 mu_dot = Vec3::Zero();
  VecX nu_dot;
};

/// Reduced dynamics with contact forces. `contact_forces[b]` is the force the
/// agent applies to the payload at arm b; the agent receives its reaction.
AgentDerivative agent_rhs(const AgentParams& params, const AgentState& state,
                          const AgentInput& input, const std::vector<Vec3>& contact_forces,
                          const AgentWrench& disturbance, const Vec3& gravity);

/// Velocity-level form on coordinates (w, v, rdot): acc = M^{-1}(force + Q_lambda).
/// The force vector contains every term except contact forces.
struct VelocityDynamics {
  MatX mass;   // 8 x 8 for n_r = 2
  VecX force;
};

VelocityDynamics agent_velocity_dynamics(const AgentParams& params, const AgentState& state,
                                         const AgentInput& input,
                                         const AgentWrench& disturbance, const Vec3& gravity);

/// Kinetic + gravitational potential energy.
double agent_energy(const AgentParams& params, const AgentState& state, const Vec3& gravity);

/// Power delivered by thrust (at the base center), base torque and joint torques.
double agent_input_power(const AgentParams& params, const AgentState& state,
                         const AgentInput& input);

}  // namespace grasplab
