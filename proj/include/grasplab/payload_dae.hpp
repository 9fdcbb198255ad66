#pragma once

#include "grasplab/agent_model.hpp"
#include "grasplab/types.hpp"

#include <string>
#include <vector>

namespace grasplab {

struct PayloadParams {
  double mass = 1.5;
  Mat3 inertia = Mat3::Identity() * 0.05;
  /// c^L_{j,b} in the payload frame, agent-major then arm.
  std::vector<Vec3> attachments;

  void validate() const;
};

struct PayloadState {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Rotation rot = Rotation::Identity();
  Vec3 omega = Vec3::Zero();  // body frame
};

struct PayloadDerivative {
  Vec3 p_dot = Vec3::Zero();
  Vec3 v_dot = Vec3::Zero();
  Mat3 rot_dot = Mat3::Zero();
  Vec3 omega_dot = Vec3::Zero();
};

/// Ground-truth payload disturbance (force inertial, torque body frame).
struct PayloadDisturbanceField {
  Vec3 drag = Vec3::Zero();
  Vec3 force_bias = Vec3::Zero();
  Vec3 angular_drag = Vec3::Zero();
  Vec3 torque_bias = Vec3::Zero();

  static PayloadDisturbanceField preset(AgentDisturbanceField::Preset p, double scale = 1.0);
  Vec6 evaluate(const PayloadState& state) const;
};

/// Net contact wrench [sum lambda; sum c x (R^T lambda)] entering the payload
/// (torque in the payload body frame).
Vec6 contact_wrench_body(const PayloadParams& params, const PayloadState& state,
                         const VecX& lambda);

/// m_L vdot = sum lambda + m_L g + f^p;  J w' + w x J w = sum c x R^T lambda + f^w.
PayloadDerivative payload_rhs(const PayloadParams& params, const PayloadState& state,
                              const VecX& lambda, const Vec6& disturbance, const Vec3& gravity);

/// Same dynamics driven by a wrench W = [F (inertial); tau (inertial)], i.e.
/// the quantity G(R_L) lambda.
PayloadDerivative payload_rhs_wrench(const PayloadParams& params, const PayloadState& state,
                                     const Vec6& wrench_inertial, const Vec6& disturbance,
                                     const Vec3& gravity);

PayloadState advance(const PayloadState& s, const PayloadDerivative& d, double h);

/// 6 x 3k grasp matrix [I ... I; hat(R c_1) ... hat(R c_k)].
MatX grasp_matrix(const Rotation& r_l, const std::vector<Vec3>& attachments);

/// z: all agent reduced states plus the payload state.
struct CoupledState {
  std::vector<AgentState> agents;
  PayloadState payload;

  /// 12 (N + 1) + 2 N n_r.
  int differential_dimension() const;
};

struct Disturbances {
  std::vector<AgentDisturbanceField> agents;
  PayloadDisturbanceField payload;

  static Disturbances none(int agents, int joints);
};

struct ContactSolve {
  VecX lambda;
  double relative_residual = 0.0;
  double condition_estimate = 1.0;
  bool least_squares_fallback = false;
};

struct ConstraintJacobian {
  MatX jacobian;  // (3 N n) x velocity dimension
  VecX bias;      // Phi'' = jacobian * acc + bias
};

struct CoupledDerivative {
  std::vector<AgentDerivative> agents;
  PayloadDerivative payload;
};

/// Rigidly grasped team of aerial manipulators and a payload, integrated as an
/// index-reduced DAE with Baumgarte-stabilized multipliers.
class CoupledSystem {
 public:
  CoupledSystem(std::vector<AgentParams> agents, PayloadParams payload, Vec3 gravity,
                double baumgarte_alpha = 20.0);

  int agent_count() const { return static_cast<int>(agents_.size()); }
  int arms_per_agent() const { return arms_; }
  int contact_count() const { return agent_count() * arms_; }
  int joints() const { return agents_.front().joint_count(); }
  int velocity_dimension() const;
  int agent_velocity_offset(int j) const { return j * (6 + joints()); }
  int payload_velocity_offset() const { return agent_count() * (6 + joints()); }

  const std::vector<AgentParams>& agent_params() const { return agents_; }
  const PayloadParams& payload_params() const { return payload_; }
  const Vec3& gravity() const { return gravity_; }
  double baumgarte_alpha() const { return alpha_; }
  void set_baumgarte_alpha(double alpha) { alpha_ = alpha; }

  /// phi_{j,b} = p_{j,b}(q_j) - (p_L + R_L c_{j,b}), stacked agent-major.
  VecX grasp_constraints(const CoupledState& z) const;
  VecX constraint_velocity(const CoupledState& z) const;
  ConstraintJacobian constraint_jacobian(const CoupledState& z) const;
  /// Stacked (w, v, rdot) per agent then (v_L, w_L).
  VecX velocities(const CoupledState& z) const;

  /// Solves D Phi M^{-1}(Q - D Phi^T lambda) + b = -2 a Phi' - a^2 Phi.
  ContactSolve solve_contact_forces(const CoupledState& z, const std::vector<AgentInput>& inputs,
                                    const Disturbances& dist) const;

  /// Same system assembled as one dense KKT matrix [[M, J^T], [J, 0]]; an
  /// independent route used to check solve_contact_forces.
  VecX solve_contact_forces_dense(const CoupledState& z, const std::vector<AgentInput>& inputs,
                                  const Disturbances& dist) const;

  CoupledDerivative rhs(const CoupledState& z, const std::vector<AgentInput>& inputs,
                        const Disturbances& dist, VecX* lambda_out = nullptr) const;

  /// One RK4 step with multipliers re-solved at every stage; inputs are held.
  /// `lambda_start` receives the multipliers of the first stage.
  CoupledState step(const CoupledState& z, const std::vector<AgentInput>& inputs,
                    const Disturbances& dist, double h, VecX* lambda_start = nullptr) const;

  /// Newton projection of agent configurations onto Phi = 0 followed by a
  /// mass-weighted velocity projection onto Phi' = 0.
  void project(CoupledState& z) const;

  /// Makes a guess consistent: agent poses and joints by Newton on Phi = 0 (payload
  /// fixed), then agent velocities so that Phi' = 0 for the given payload motion.
  CoupledState consistent_init(const CoupledState& guess) const;

  double total_energy(const CoupledState& z) const;
  Vec3 total_linear_momentum(const CoupledState& z) const;

 private:
  struct Assembly {
    std::vector<Eigen::LLT<MatX>> agent_mass;
    std::vector<VecX> agent_force;
    Vec6 payload_force;
  };
  Assembly assemble(const CoupledState& z, const std::vector<AgentInput>& inputs,
                    const Disturbances& dist) const;
  MatX apply_inverse_mass(const CoupledState& z, const Assembly& a, const MatX& rhs) const;
  VecX apply_inverse_mass(const CoupledState& z, const Assembly& a, const VecX& rhs) const;
  bool newton_positions(CoupledState& z, int max_iter, double tol) const;
  void project_velocities(CoupledState& z, bool agents_only) const;

  std::vector<AgentParams> agents_;
  PayloadParams payload_;
  Vec3 gravity_;
  double alpha_;
  int arms_ = 0;
};

}  // namespace grasplab
