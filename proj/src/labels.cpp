#include "grasplab/labels.hpp"

#include "grasplab/liegroup.hpp"

namespace grasplab {

namespace {

void put_rotation(VecX& f, int offset, const Rotation& r) {
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) f(offset + 3 * i + j) = r(i, j);
  }
}

void push_rotation_names(std::vector<std::string>& names, const std::string& prefix) {
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) names.push_back(prefix + std::to_string(i) + std::to_string(j));
  }
}

void push_xyz(std::vector<std::string>& names, const std::string& prefix) {
  for (const char* c : {"x", "y", "z"}) names.push_back(prefix + c);
}

}  // namespace

int payload_feature_dimension() { return 20; }

VecX payload_features(const PayloadState& s, const Vec3& e_p) {
  VecX f(payload_feature_dimension());
  f.segment<3>(0) = s.p;
  f.segment<3>(3) = s.v;
  put_rotation(f, 6, s.rot);
  f.segment<3>(15) = s.omega;
  f.segment<2>(18) = e_p.head<2>();
  return f;
}

std::vector<std::string> payload_feature_names() {
  std::vector<std::string> n;
  push_xyz(n, "p_");
  push_xyz(n, "v_");
  push_rotation_names(n, "R_");
  push_xyz(n, "w_");
  n.push_back("ep_x");
  n.push_back("ep_y");
  return n;
}

std::vector<std::string> payload_label_names() {
  std::vector<std::string> n;
  push_xyz(n, "yp_");
  push_xyz(n, "yw_");
  return n;
}

int agent_feature_dimension(int joints) { return 18 + 2 * joints; }

VecX agent_features(const AgentState& s) {
  const int n = static_cast<int>(s.r.size());
  VecX f(agent_feature_dimension(n));
  put_rotation(f, 0, s.rot);
  f.segment<3>(9) = s.x;
  f.segment(12, n) = s.r;
  f.segment<3>(12 + n) = s.omega;
  f.segment<3>(15 + n) = s.v;
  f.segment(18 + n, n) = s.rdot;
  return f;
}

std::vector<std::string> agent_feature_names(int joints) {
  std::vector<std::string> n;
  push_rotation_names(n, "R_");
  push_xyz(n, "x_");
  for (int k = 1; k <= joints; ++k) n.push_back("r_" + std::to_string(k));
  push_xyz(n, "w_");
  push_xyz(n, "v_");
  for (int k = 1; k <= joints; ++k) n.push_back("rdot_" + std::to_string(k));
  return n;
}

int agent_label_channels(int joints) { return 6 + joints; }

std::vector<std::string> agent_label_names(int joints) {
  std::vector<std::string> n;
  push_xyz(n, "yx_");
  push_xyz(n, "yw_");
  for (int k = 1; k <= joints; ++k) n.push_back("yr_" + std::to_string(k));
  return n;
}

VecX agent_label(const AgentParams& params, const AgentState& prev, const AgentState& cur,
                 const AgentState& next, double h, const AgentInput& input,
                 const std::vector<Vec3>& lambda_hat, const Vec3& gravity) {
  const int n = params.joint_count();
  const double m = params.total_mass();
  const Vec3 e3 = Vec3::UnitZ();
  const MassBlocks blocks = mass_matrix(params, cur.r);

  const Vec3 acc = (next.v - prev.v) / (2.0 * h);
  const Vec3 mu_dot = (next.mu - prev.mu) / (2.0 * h);
  const VecX nu_dot = (next.nu - prev.nu) / (2.0 * h);

  Vec3 lambda_sum = Vec3::Zero();
  VecX generalized = VecX::Zero(3 + n);
  for (int b = 0; b < n; ++b) {
    lambda_sum += lambda_hat[b];
    generalized += contact_jacobian(params, cur, b) * lambda_hat[b];
  }

  VecX y(agent_label_channels(n));
  // f^c_x(lambda) = -sum lambda
  y.segment<3>(0) = m * acc - m * gravity - cur.rot * e3 * input.thrust + lambda_sum;
  y.segment<3>(3) = mu_dot - cur.mu.cross(cur.omega) - input.torque +
                    blocks.coupling.transpose() * e3 * input.thrust / m + generalized.head<3>();
  y.segment(6, n) = nu_dot - quadratic_mass_term(params, cur.r, cur.xi_bar()).tail(n) -
                    input.joint_torque + blocks.vel_joint.transpose() * e3 * input.thrust / m +
                    generalized.tail(n);
  return y;
}

VecX payload_label(const PayloadParams& nominal, const PayloadState& prev,
                   const PayloadState& cur, const PayloadState& next, double h,
                   const VecX& lambda_hat, const Vec3& gravity) {
  const Vec3 acc = (next.v - prev.v) / (2.0 * h);
  const Vec3 w_dot = (next.omega - prev.omega) / (2.0 * h);
  const Vec6 w = contact_wrench_body(nominal, cur, lambda_hat);
  VecX y(6);
  y.head<3>() = nominal.mass * acc - w.head<3>() - nominal.mass * gravity;
  y.tail<3>() = nominal.inertia * w_dot + cur.omega.cross(nominal.inertia * cur.omega) - w.tail<3>();
  return y;
}

VecX add_label_noise(const VecX& y, double sigma, std::mt19937_64& rng) {
  if (sigma <= 0.0) return y;
  std::normal_distribution<double> normal(0.0, sigma);
  VecX out = y;
  for (int i = 0; i < out.size(); ++i) out(i) += normal(rng);
  return out;
}

}  // namespace grasplab
