#include "grasplab/control.hpp"

#include "grasplab/liegroup.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace grasplab {

namespace {

bool is_spd(const Mat3& m) {
  if ((m - m.transpose()).norm() > 1e-12 * (1.0 + m.norm())) return false;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  return eig.eigenvalues().minCoeff() > 0.0;
}

}  // namespace

PayloadGains PayloadGains::defaults(const Mat3& inertia) {
  PayloadGains g;
  const double tr = inertia.trace();
  g.kr = Mat3::Identity() * 8.0 * tr;
  g.kw = Mat3::Identity() * 2.5 * tr;
  return g;
}

void PayloadGains::validate() const {
  if (!is_spd(kp) || !is_spd(kv) || !is_spd(kr) || !is_spd(kw)) {
    throw ConfigError("payload gains must be symmetric positive definite");
  }
}

RefSample Reference::at(double t) const {
  RefSample s;
  s.rot = attitude;
  s.p = center;
  if (kind == Kind::Hover) return s;
  const double w = 2.0 * std::numbers::pi / period;
  const double s1 = std::sin(w * t);
  const double c1 = std::cos(w * t);
  const double s2 = std::sin(2.0 * w * t);
  const double c2 = std::cos(2.0 * w * t);
  s.p += Vec3(amplitude_x * s1, 0.5 * amplitude_y * s2, 0.0);
  s.v = Vec3(amplitude_x * w * c1, amplitude_y * w * c2, 0.0);
  s.a = Vec3(-amplitude_x * w * w * s1, -2.0 * amplitude_y * w * w * s2, 0.0);
  return s;
}

PayloadErrors payload_errors(const PayloadState& state, const RefSample& ref) {
  PayloadErrors e;
  e.e_p = state.p - ref.p;
  e.e_v = state.v - ref.v;
  const AttitudeError a = attitude_errors(state.rot, state.omega, ref.rot, ref.omega);
  e.e_r = a.e_r;
  e.e_omega = a.e_omega;
  e.psi = a.psi;
  return e;
}

Vec6 WrenchCommand::inertial(const Rotation& r_l) const {
  Vec6 w;
  w << force, r_l * torque;
  return w;
}

WrenchCommand wrench_nominal(const PayloadParams& nominal, const PayloadState& state,
                             const RefSample& ref, const PayloadGains& gains,
                             const Vec3& gravity) {
  const PayloadErrors e = payload_errors(state, ref);
  const double m = nominal.mass;
  const Mat3& j = nominal.inertia;
  const Vec3& w = state.omega;
  const Mat3 rt_rd = state.rot.transpose() * ref.rot;
  WrenchCommand c;
  c.force = m * ref.a - m * gains.kp * e.e_p - m * gains.kv * e.e_v - m * gravity;
  c.torque = -gains.kr * e.e_r - gains.kw * e.e_omega + w.cross(j * w) -
             j * (hat(w) * rt_rd * ref.omega - rt_rd * ref.omega_dot);
  return c;
}

WrenchCommand wrench_learning(const PayloadParams& nominal, const PayloadState& state,
                              const RefSample& ref, const PayloadGains& gains,
                              const Vec6& disturbance_mean, const Vec3& gravity) {
  WrenchCommand c = wrench_nominal(nominal, state, ref, gains, gravity);
  c.force -= disturbance_mean.head<3>();
  c.torque -= disturbance_mean.tail<3>();
  return c;
}

PayloadAccelerationTarget closed_loop_acceleration(const PayloadParams& nominal,
                                                   const PayloadState& state,
                                                   const RefSample& ref,
                                                   const PayloadGains& gains) {
  const PayloadErrors e = payload_errors(state, ref);
  const Mat3 rt_rd = state.rot.transpose() * ref.rot;
  PayloadAccelerationTarget t;
  t.linear = ref.a - gains.kp * e.e_p - gains.kv * e.e_v;
  t.angular = nominal.inertia.ldlt().solve(-gains.kr * e.e_r - gains.kw * e.e_omega) -
              hat(state.omega) * rt_rd * ref.omega + rt_rd * ref.omega_dot;
  return t;
}

namespace {

MatX select_columns(const MatX& g, const std::vector<int>& contacts) {
  MatX out(g.rows(), 3 * static_cast<int>(contacts.size()));
  for (std::size_t i = 0; i < contacts.size(); ++i) {
    out.middleCols<3>(3 * static_cast<int>(i)) = g.middleCols<3>(3 * contacts[i]);
  }
  return out;
}

MatX kernel_basis(const MatX& a) {
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
  const VecX& s = svd.singularValues();
  const double tol = std::max(a.rows(), a.cols()) * (s.size() ? s(0) : 0.0) * 1e-12;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s(i) > tol ? 1 : 0;
  return svd.matrixV().rightCols(a.cols() - rank);
}

std::vector<int> complement(int total, const std::vector<int>& leaders) {
  std::vector<int> out;
  for (int i = 0; i < total; ++i) {
    if (std::find(leaders.begin(), leaders.end(), i) == leaders.end()) out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<int> default_leader_set(int arms_per_agent) {
  std::vector<int> l;
  for (int b = 0; b < arms_per_agent; ++b) l.push_back(b);
  l.push_back(arms_per_agent);
  return l;
}

MatX internal_force_basis(const Rotation& r_l, const std::vector<Vec3>& attachments,
                          const std::vector<int>& leaders, InternalForceBasis mode) {
  const int k = static_cast<int>(attachments.size());
  if (mode == InternalForceBasis::Grasp) {
    // ker G(R) = blockdiag(R) ker G(I), so the basis turns smoothly with the payload
    const MatX n0 = kernel_basis(grasp_matrix(Rotation::Identity(), attachments));
    MatX n(3 * k, n0.cols());
    for (int i = 0; i < k; ++i) n.middleRows<3>(3 * i) = r_l * n0.middleRows<3>(3 * i);
    return n;
  }
  const std::vector<int> followers = complement(k, leaders);
  const MatX gf = select_columns(grasp_matrix(r_l, attachments), followers);
  const MatX nf = kernel_basis(gf);
  MatX n = MatX::Zero(3 * k, nf.cols());
  for (std::size_t i = 0; i < followers.size(); ++i) {
    n.middleRows<3>(3 * followers[i]) = nf.middleRows<3>(3 * static_cast<int>(i));
  }
  return n;
}

Allocation allocate(const Vec6& wrench_inertial, const Rotation& r_l,
                    const std::vector<Vec3>& attachments, const std::vector<int>& leaders,
                    const VecX& eta, InternalForceBasis mode, const VecX& lambda_f0) {
  const int k = static_cast<int>(attachments.size());
  for (int l : leaders) {
    if (l < 0 || l >= k) throw ConfigError("leader contact index out of range");
  }
  Allocation a;
  a.leaders = leaders;
  a.followers = complement(k, leaders);
  const MatX g = grasp_matrix(r_l, attachments);
  const MatX gl = select_columns(g, leaders);

  Eigen::JacobiSVD<MatX> svd(gl, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  a.leader_condition = s.size() < 6 || s(5) <= 0.0 ? INFINITY : s(0) / s(5);
  if (s.size() < 6 || s(5) <= 1e-9 * s(0)) {
    std::ostringstream os;
    os << "leader grasp block is rank deficient (smallest singular value "
       << (s.size() < 6 ? 0.0 : s(5)) << ", condition " << a.leader_condition << ")";
    throw SolverError(os.str());
  }
  const MatX gl_pinv = svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();

  a.lambda = VecX::Zero(3 * k);
  const VecX ll = gl_pinv * wrench_inertial;
  for (std::size_t i = 0; i < leaders.size(); ++i) {
    a.lambda.segment<3>(3 * leaders[i]) = ll.segment<3>(3 * static_cast<int>(i));
  }
  if (lambda_f0.size() > 0) {
    if (lambda_f0.size() != 3 * static_cast<int>(a.followers.size())) {
      throw ConfigError("lambda_f0 has the wrong dimension");
    }
    // keep only the part in ker G_f so the net wrench is untouched
    const MatX gf = select_columns(g, a.followers);
    const MatX nf = kernel_basis(gf);
    const VecX f0 = nf * (nf.transpose() * lambda_f0);
    for (std::size_t i = 0; i < a.followers.size(); ++i) {
      a.lambda.segment<3>(3 * a.followers[i]) += f0.segment<3>(3 * static_cast<int>(i));
    }
  }

  a.basis = internal_force_basis(r_l, attachments, leaders, mode);
  a.nullspace_dimension = static_cast<int>(a.basis.cols());
  a.eta = VecX::Zero(a.nullspace_dimension);
  const int used = std::min<int>(a.nullspace_dimension, static_cast<int>(eta.size()));
  a.eta.head(used) = eta.head(used);
  if (a.nullspace_dimension > 0) a.lambda += a.basis * a.eta;
  return a;
}

AgentRealization::AgentRealization(AgentParams params, GraspFrame grasp,
                                   std::vector<Vec3> attachments, AgentGains gains,
                                   Vec3 gravity)
    : params_(std::move(params)),
      grasp_(std::move(grasp)),
      attachments_(std::move(attachments)),
      gains_(gains),
      gravity_(gravity) {
  if (static_cast<int>(attachments_.size()) != params_.joint_count()) {
    throw ConfigError("agent realization needs one attachment per arm");
  }
}

std::optional<GraspFrame> AgentRealization::grasped_pose(const PayloadState& payload,
                                                        const Vec3& b3,
                                                        const GraspFrame* start) const {
  const int n = params_.joint_count();
  const int dim = 6 + n;
  const GraspFrame& s0 = start ? *start : grasp_;
  Vec3 x = payload.p + payload.rot * s0.offset;
  Rotation rot = payload.rot * s0.rot;
  VecX r = s0.joints;
  VecX res(dim);
  MatX jac = MatX::Zero(dim, dim);
  for (int it = 0; it < 30; ++it) {
    for (int b = 0; b < n; ++b) {
      const Vec3 d = contact_offset(params_, r, b);
      res.segment<3>(3 * b) = x + rot * d - (payload.p + payload.rot * attachments_[b]);
      jac.block<3, 3>(3 * b, 0).setIdentity();
      jac.block<3, 3>(3 * b, 3) = -rot * hat(d);
      jac.block(3 * b, 6, 3, n) = rot * contact_offset_jacobian(params_, r, b);
    }
    const Vec3 tilt = rot.transpose() * b3;
    res.segment<2>(3 * n) = tilt.head<2>();
    jac.block(3 * n, 0, 2, dim).setZero();
    jac.block<2, 3>(3 * n, 3) = hat(tilt).topRows<2>();
    const VecX step = jac.partialPivLu().solve(-res);
    if (!step.allFinite()) return std::nullopt;
    x += step.head<3>();
    rot = project_to_so3(rot * exp_so3(step.segment<3>(3)));
    r += step.tail(n);
    if (step.norm() < 1e-12) break;
  }
  if (res.norm() > 1e-10) return std::nullopt;
  GraspFrame out;
  out.rot = payload.rot.transpose() * rot;
  out.offset = payload.rot.transpose() * (x - payload.p);
  out.joints = r;
  return out;
}

std::optional<Rotation> AgentRealization::desired_rotation(
    const std::vector<Vec3>& lambda_cmd, const PayloadState& payload,
    const PayloadAccelerationTarget& payload_acc, const AgentWrench* f_hat,
    const Vec3* base_acc, Vec3* required_force) const {
  const Rotation& rl = payload.rot;
  const Vec3 wl = rl * payload.omega;
  const Vec3 wl_dot = rl * payload_acc.angular;
  const Vec3 arm = rl * grasp_.offset;
  const Vec3 a_ref =
      base_acc ? *base_acc : Vec3(payload_acc.linear + wl_dot.cross(arm) + wl.cross(wl.cross(arm)));
  const Rotation r_ref = rl * grasp_.rot;

  Vec3 lambda_sum = Vec3::Zero();
  for (const Vec3& l : lambda_cmd) lambda_sum += l;
  const Vec3 f_hat_x = f_hat ? f_hat->force : Vec3::Zero();
  const Vec3 f = params_.total_mass() * (a_ref - gravity_) + lambda_sum - f_hat_x;
  if (required_force) *required_force = f;
  if (f.norm() < 1e-9) return std::nullopt;

  const Vec3 b3 = f.normalized();
  Vec3 b1 = r_ref.col(0) - b3.dot(r_ref.col(0)) * b3;
  if (b1.norm() < 1e-6) b1 = r_ref.col(1).cross(b3);
  b1.normalize();
  Rotation rd;
  rd.col(0) = b1;
  rd.col(1) = b3.cross(b1);
  rd.col(2) = b3;
  return rd;
}

AgentCommand AgentRealization::compute(const AgentState& s, const std::vector<Vec3>& lambda_cmd,
                                       const PayloadState& payload,
                                       const PayloadAccelerationTarget& payload_acc,
                                       const AgentWrench* f_hat, const AttitudeFeedforward* ff) {
  const int n = params_.joint_count();
  const double m = params_.total_mass();

  // payload motion in the inertial frame
  const Rotation& rl = payload.rot;
  const Vec3 wl = rl * payload.omega;
  const Vec3 wl_dot = rl * payload_acc.angular;
  const Vec3 al = payload_acc.linear;
  auto point_acc = [&](const Vec3& arm) -> Vec3 {
    return al + wl_dot.cross(arm) + wl.cross(wl.cross(arm));
  };

  // grasp kinematics: k_rows * acc = k_rhs keeps every contact on its attachment
  const int nv = 6 + n;
  const int nc = 3 * n;
  MatX k_rows = MatX::Zero(nc, nv);
  VecX k_rhs(nc);
  Vec3 com_curv = Vec3::Zero();
  for (int k = 0; k < n; ++k) {
    com_curv += params_.arms[k].link_mass * link_curvature(params_.arms[k], s.r(k)) *
                s.rdot(k) * s.rdot(k) / m;
  }
  for (int b = 0; b < n; ++b) {
    const Vec3 d = contact_offset(params_, s.r, b);
    const MatX dj = contact_offset_jacobian(params_, s.r, b);
    k_rows.block<3, 3>(3 * b, 0) = -s.rot * hat(d);
    k_rows.block<3, 3>(3 * b, 3).setIdentity();
    k_rows.block(3 * b, 6, 3, n) = s.rot * dj;
    const Vec3 h = link_curvature(params_.arms[b], s.r(b)) * s.rdot(b) * s.rdot(b) - com_curv;
    const Vec3 d_dot = dj * s.rdot;
    const Vec3 bias = s.rot * (s.omega.cross(s.omega.cross(d)) + 2.0 * s.omega.cross(d_dot) + h);
    k_rhs.segment<3>(3 * b) = point_acc(rl * attachments_[b]) - bias;
  }

  // base acceleration implied by the feedforward tilt rate
  std::optional<Vec3> base_acc;
  if (ff) {
    const Mat3 rt = s.rot.transpose() * ff->rot;
    const Vec3 w_dot_ff = rt * ff->omega_dot - hat(s.omega) * rt * ff->omega;
    MatX kin(nc + 2, nv);
    VecX kin_rhs(nc + 2);
    kin << k_rows, MatX::Identity(2, nv);
    kin_rhs << k_rhs, w_dot_ff.head<2>();
    base_acc = Vec3(kin.colPivHouseholderQr().solve(kin_rhs).segment<3>(3));
  }

  AgentCommand out;
  const std::optional<Rotation> attitude =
      desired_rotation(lambda_cmd, payload, payload_acc, f_hat,
                       base_acc ? &*base_acc : nullptr, &out.required_force);
  Rotation rd;
  if (attitude) {
    rd = *attitude;
  } else {
    rd = last_rd_ ? *last_rd_ : Rotation(rl * grasp_.rot);
    out.attitude_held = true;
  }
  last_rd_ = rd;
  out.desired_rot = rd;

  Vec3 wd = rd.transpose() * wl;
  Vec3 wd_dot = rd.transpose() * wl_dot;
  if (ff) {
    const Mat3 transport = rd.transpose() * ff->rot;
    wd = transport * ff->omega;
    wd_dot = transport * ff->omega_dot;
  }

  const AttitudeError ae = attitude_errors(s.rot, s.omega, rd, wd);
  const Mat3 rt_rd = s.rot.transpose() * rd;
  const Vec3 omega_dot_cmd = -gains_.k_attitude * ae.e_r - gains_.k_rate * ae.e_omega -
                             hat(s.omega) * rt_rd * wd + rt_rd * wd_dot;

  // Unknowns y = [acc (w', v', r''), inputs (u, tau, tau_r), lambda]. The agent
  // dynamics and the grasp kinematics for the target payload motion are hard
  // constraints; the attitude command and lambda_cmd are tracked in least squares.
  const int ni = 4 + n;
  const int ny = nv + ni + nc;
  const int ne = nv + nc;

  AgentWrench dist = f_hat ? *f_hat : AgentWrench::zero(n);
  if (dist.joint.size() != n) dist.joint = VecX::Zero(n);
  const AgentInput zero_in = AgentInput::zero(n);
  const VelocityDynamics base = agent_velocity_dynamics(params_, s, zero_in, dist, gravity_);
  MatX b_in(nv, ni);
  for (int i = 0; i < ni; ++i) {
    AgentInput u = zero_in;
    if (i == 0) u.thrust = 1.0;
    else if (i < 4) u.torque(i - 1) = 1.0;
    else u.joint_torque(i - 4) = 1.0;
    b_in.col(i) = agent_velocity_dynamics(params_, s, u, dist, gravity_).force - base.force;
  }
  MatX q(nv, nc);
  for (int b = 0; b < n; ++b) {
    const MatX jc = contact_jacobian(params_, s, b);
    q.block<3, 3>(0, 3 * b) = jc.topRows<3>();
    q.block<3, 3>(3, 3 * b).setIdentity();
    q.block(6, 3 * b, n, 3) = jc.bottomRows(n);
  }

  MatX a_eq = MatX::Zero(ne, ny);
  VecX b_eq(ne);
  a_eq.topLeftCorner(nv, nv) = base.mass;
  a_eq.block(0, nv, nv, ni) = -b_in;
  a_eq.block(0, nv + ni, nv, nc) = q;
  b_eq.head(nv) = base.force;
  a_eq.bottomLeftCorner(nc, nv) = k_rows;
  b_eq.tail(nc) = k_rhs;

  VecX weight = VecX::Constant(ny, gains_.regularization);
  VecX target = VecX::Zero(ny);
  weight.head<2>().setConstant(1.0);  // yaw follows the payload through the grasp
  target.head<3>() = omega_dot_cmd;
  weight.tail(nc).setConstant(gains_.force_weight);
  for (int b = 0; b < n; ++b) target.segment<3>(nv + ni + 3 * b) = lambda_cmd[b];

  MatX kkt = MatX::Zero(ny + ne, ny + ne);
  kkt.topLeftCorner(ny, ny) = weight.asDiagonal();
  kkt.topRightCorner(ny, ne) = a_eq.transpose();
  kkt.bottomLeftCorner(ne, ny) = a_eq;
  VecX rhs(ny + ne);
  rhs << weight.cwiseProduct(target), b_eq;
  const VecX sol = kkt.partialPivLu().solve(rhs);

  out.contact_forces = sol.segment(nv + ni, nc);
  out.input.thrust = std::max(0.0, sol(nv));
  out.input.torque = sol.segment<3>(nv + 1);
  out.input.joint_torque = sol.segment(nv + 4, n);
  return out;
}

RealizationDiagnostics wrench_mismatch(const VecX& lambda_app, const VecX& lambda_cmd,
                                       const Vec6& wrench_cmd, const MatX& grasp) {
  if (lambda_app.size() != lambda_cmd.size() || grasp.cols() != lambda_app.size()) {
    throw std::invalid_argument("wrench_mismatch: dimension mismatch");
  }
  RealizationDiagnostics d;
  d.e_lambda = lambda_app - lambda_cmd;
  d.delta_w = grasp * lambda_app - wrench_cmd;
  return d;
}

namespace {

struct NnlsResult {
  VecX x;
  double sse = INFINITY;
};

// exact nonnegative least squares by enumerating active sets (few unknowns)
NnlsResult nnls_small(const MatX& a, const VecX& y) {
  const int p = static_cast<int>(a.cols());
  NnlsResult best;
  for (unsigned mask = 0; mask < (1u << p); ++mask) {
    std::vector<int> idx;
    for (int i = 0; i < p; ++i) {
      if (mask & (1u << i)) idx.push_back(i);
    }
    VecX x = VecX::Zero(p);
    if (!idx.empty()) {
      MatX sub(a.rows(), static_cast<int>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) sub.col(static_cast<int>(i)) = a.col(idx[i]);
      const VecX xs = sub.completeOrthogonalDecomposition().solve(y);
      if ((xs.array() < 0.0).any()) continue;
      for (std::size_t i = 0; i < idx.size(); ++i) x(idx[i]) = xs(static_cast<int>(i));
    }
    const double sse = (a * x - y).squaredNorm();
    if (sse < best.sse) best = {x, sse};
  }
  return best;
}

MatX interface_design(const std::vector<InterfaceSample>& samples, double gamma, int agents) {
  MatX a(static_cast<int>(samples.size()), 2 + agents);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const int r = static_cast<int>(i);
    a(r, 0) = std::exp(-gamma * (s.t - s.t_k)) * s.e_lambda_k;
    a(r, 1) = 1.0;
    for (int j = 0; j < agents; ++j) a(r, 2 + j) = j < static_cast<int>(s.rho.size()) ? s.rho[j] : 0.0;
  }
  return a;
}

}  // namespace

InterfaceConstants fit_interface_constants(const std::vector<InterfaceSample>& samples,
                                           double gamma_max) {
  InterfaceConstants c;
  if (samples.empty()) return c;
  int agents = 0;
  for (const auto& s : samples) agents = std::max(agents, static_cast<int>(s.rho.size()));
  VecX y(static_cast<int>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<int>(i)) = samples[i].delta_w;

  auto objective = [&](double gamma) {
    return nnls_small(interface_design(samples, gamma, agents), y).sse;
  };
  const auto best = boost::math::tools::brent_find_minima(
      objective, 0.0, gamma_max, std::numeric_limits<double>::digits / 2);
  c.gamma = best.first;
  const MatX a = interface_design(samples, c.gamma, agents);
  const NnlsResult fit = nnls_small(a, y);
  c.alpha = fit.x(0);
  c.theta = fit.x(1);
  c.kappa.assign(agents, 0.0);
  for (int j = 0; j < agents; ++j) c.kappa[j] = fit.x(2 + j);
  const VecX resid = y - a * fit.x;
  c.rms_residual = std::sqrt(resid.squaredNorm() / static_cast<double>(y.size()));
  c.theta += std::max(0.0, resid.maxCoeff());

  VecX x = fit.x;
  x(1) = c.theta;
  const VecX bound = a * x;
  int covered = 0;
  for (int i = 0; i < y.size(); ++i) covered += y(i) <= bound(i) * (1.0 + 1e-12) + 1e-15 ? 1 : 0;
  c.coverage = static_cast<double>(covered) / static_cast<double>(y.size());
  return c;
}

}  // namespace grasplab
