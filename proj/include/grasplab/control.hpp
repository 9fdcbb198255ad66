#pragma once

#include "grasplab/agent_model.hpp"
#include "grasplab/payload_dae.hpp"
#include "grasplab/types.hpp"

#include <optional>
#include <vector>

namespace grasplab {

struct PayloadGains {
  Mat3 kp = Mat3::Identity() * 4.0;  // 1/s^2, multiplied by m_L
  Mat3 kv = Mat3::Identity() * 4.0;  // 1/s, multiplied by m_L
  Mat3 kr = Mat3::Identity();        // N m
  Mat3 kw = Mat3::Identity();        // N m s

  /// Kp = 4 I, Kv = 4 I, K_R = 8 tr(J_L) I, K_w = 2.5 tr(J_L) I.
  static PayloadGains defaults(const Mat3& inertia);
  void validate() const;
};

struct RefSample {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 a = Vec3::Zero();
  Rotation rot = Rotation::Identity();
  Vec3 omega = Vec3::Zero();      // body frame of the reference
  Vec3 omega_dot = Vec3::Zero();
};

/// Smooth payload reference. Figure-eight: p = c + (A_x sin wt, A_y sin 2wt / 2, 0)
/// with w = 2 pi / period; hover holds c. Attitude is constant.
struct Reference {
  enum class Kind { Hover, FigureEight };
  Kind kind = Kind::FigureEight;
  Vec3 center = Vec3(0.0, 0.0, 1.0);
  double amplitude_x = 1.0;
  double amplitude_y = 1.0;
  double period = 10.0;
  Rotation attitude = Rotation::Identity();

  RefSample at(double t) const;
};

struct PayloadErrors {
  Vec3 e_p = Vec3::Zero();
  Vec3 e_v = Vec3::Zero();
  Vec3 e_r = Vec3::Zero();
  Vec3 e_omega = Vec3::Zero();
  double psi = 0.0;
};

PayloadErrors payload_errors(const PayloadState& state, const RefSample& ref);

/// Force in the inertial frame, torque in the payload body frame.
struct WrenchCommand {
  Vec3 force = Vec3::Zero();
  Vec3 torque = Vec3::Zero();

  /// [F; R_L tau], the frame in which G(R_L) lambda is expressed.
  Vec6 inertial(const Rotation& r_l) const;
};

/// Geometric payload wrench law computed with the nominal (m_L, J_L).
WrenchCommand wrench_nominal(const PayloadParams& nominal, const PayloadState& state,
                             const RefSample& ref, const PayloadGains& gains,
                             const Vec3& gravity);

/// wrench_nominal minus the learned payload disturbance mean [f^p; f^w].
WrenchCommand wrench_learning(const PayloadParams& nominal, const PayloadState& state,
                              const RefSample& ref, const PayloadGains& gains,
                              const Vec6& disturbance_mean, const Vec3& gravity);

/// Payload accelerations the wrench law aims for: (v_L', w_L') of the nominal
/// closed loop.
struct PayloadAccelerationTarget {
  Vec3 linear = Vec3::Zero();
  Vec3 angular = Vec3::Zero();  // body frame
};

PayloadAccelerationTarget closed_loop_acceleration(const PayloadParams& nominal,
                                                   const PayloadState& state,
                                                   const RefSample& ref,
                                                   const PayloadGains& gains);

enum class InternalForceBasis {
  /// Orthonormal basis of ker G(R_L) for the full grasp, rotated with the payload.
  Grasp,
  /// Orthonormal basis of ker G_f(R_L) for the follower block alone.
  Follower,
};

struct Allocation {
  std::vector<int> leaders;
  std::vector<int> followers;
  VecX lambda;     // stacked, agent-major
  VecX eta;
  MatX basis;      // internal-force basis (3Nn x dim), zero columns if trivial
  int nullspace_dimension = 0;
  double leader_condition = 0.0;
};

/// lambda_l = G_l^+ W, lambda_f = lambda_f0 + (internal-force term) with the
/// Moore-Penrose right inverse. `eta` may be shorter than the basis; missing
/// entries are zero, extra entries are ignored.
Allocation allocate(const Vec6& wrench_inertial, const Rotation& r_l,
                    const std::vector<Vec3>& attachments, const std::vector<int>& leaders,
                    const VecX& eta, InternalForceBasis mode = InternalForceBasis::Grasp,
                    const VecX& lambda_f0 = VecX());

MatX internal_force_basis(const Rotation& r_l, const std::vector<Vec3>& attachments,
                          const std::vector<int>& leaders, InternalForceBasis mode);

/// Leader set used when none is configured: every contact of agent 0 plus the
/// first contact of agent 1.
std::vector<int> default_leader_set(int arms_per_agent);

/// Attitude and joint loop settings of the agent realization layer.
struct AgentGains {
  double k_attitude = 60.0;       // 1/s^2
  double k_rate = 16.0;           // 1/s
  double force_weight = 1e-2;     // weight of |lambda - lambda_cmd|^2 against |w' - w'_cmd|^2
  double regularization = 1e-9;   // on every other unknown
};

/// Desired agent motion induced by the payload through the nominal grasp.
struct GraspFrame {
  Rotation rot = Rotation::Identity();  // R_L^T R_j at the grasp configuration
  Vec3 offset = Vec3::Zero();           // R_L^T (x_j - p_L)
  VecX joints;
};

struct AgentCommand {
  AgentInput input;
  Rotation desired_rot = Rotation::Identity();
  Vec3 required_force = Vec3::Zero();
  bool attitude_held = false;
  VecX contact_forces;  // predicted by the realization, stacked per arm
};

/// Desired attitude with body-frame rate and acceleration.
struct AttitudeFeedforward {
  Rotation rot = Rotation::Identity();
  Vec3 omega = Vec3::Zero();
  Vec3 omega_dot = Vec3::Zero();
};

/// Cascaded realization of commanded contact forces on one agent. The required
/// translational force fixes the thrust axis. Inputs then come from a
/// least-squares problem over accelerations, inputs and contact forces with the
/// agent dynamics and the grasp kinematics as equality constraints: the attitude
/// command is tracked first and the contact forces as closely as the current
/// tilt allows.
class AgentRealization {
 public:
  AgentRealization(AgentParams params, GraspFrame grasp, std::vector<Vec3> attachments,
                   AgentGains gains, Vec3 gravity);

  /// `lambda_cmd`: forces this agent should apply to the payload, one per arm.
  /// `f_hat`: learned disturbance mean (pass nullptr in no-learning mode).
  /// `ff`: rate and acceleration of the desired attitude along the nominal
  /// motion; without it only the payload-induced rate is fed forward.
  AgentCommand compute(const AgentState& state, const std::vector<Vec3>& lambda_cmd,
                       const PayloadState& payload, const PayloadAccelerationTarget& payload_acc,
                       const AgentWrench* f_hat, const AttitudeFeedforward* ff = nullptr);

  /// Thrust axis along the required force, heading from the grasp-induced
  /// attitude. Empty when the required force vanishes. The base acceleration
  /// is `base_acc` when given, else that of the rigidly grasped point.
  std::optional<Rotation> desired_rotation(const std::vector<Vec3>& lambda_cmd,
                                           const PayloadState& payload,
                                           const PayloadAccelerationTarget& payload_acc,
                                           const AgentWrench* f_hat,
                                           const Vec3* base_acc = nullptr,
                                           Vec3* required_force = nullptr) const;

  const GraspFrame& grasp() const { return grasp_; }
  /// Base pose with every contact on its attachment and the thrust axis along
  /// `b3`. Newton from `start` (payload-relative) or the grasp configuration;
  /// empty if it stalls.
  std::optional<GraspFrame> grasped_pose(const PayloadState& payload, const Vec3& b3,
                                         const GraspFrame* start = nullptr) const;

 private:
  AgentParams params_;
  GraspFrame grasp_;
  std::vector<Vec3> attachments_;
  AgentGains gains_;
  Vec3 gravity_;
  std::optional<Rotation> last_rd_;
};

struct RealizationDiagnostics {
  VecX e_lambda;
  Vec6 delta_w = Vec6::Zero();
};

/// dW = G lambda_app - W_cmd, e_lambda = lambda_app - lambda_cmd.
RealizationDiagnostics wrench_mismatch(const VecX& lambda_app, const VecX& lambda_cmd,
                                       const Vec6& wrench_cmd, const MatX& grasp);

/// One observation for the agent-layer interface bound.
struct InterfaceSample {
  double t = 0.0;
  double t_k = 0.0;           // start of the active data interval
  double delta_w = 0.0;       // |dW(t)|
  double e_lambda_k = 0.0;    // |e_lambda(t_k)|
  std::vector<double> rho;    // rho_j(t) per agent
};

/// |dW| <= alpha e^{-gamma (t - t_k)} |e_lambda(t_k)| + theta + sum kappa_j rho_j.
struct InterfaceConstants {
  double alpha = 0.0;
  double gamma = 0.0;
  double theta = 0.0;
  std::vector<double> kappa;
  double rms_residual = 0.0;  // of the least-squares fit, before the envelope shift
  double coverage = 0.0;      // fraction of samples satisfying the bound
};

/// Nonnegative least squares for (alpha, theta, kappa) at each gamma, Brent
/// minimization over gamma, then theta raised so the bound envelopes the data.
InterfaceConstants fit_interface_constants(const std::vector<InterfaceSample>& samples,
                                           double gamma_max = 50.0);

}  // namespace grasplab
