#pragma once

#include "grasplab/agent_model.hpp"
#include "grasplab/payload_dae.hpp"
#include "grasplab/types.hpp"

#include <random>
#include <string>
#include <vector>

namespace grasplab {

/// [p(3), v(3), R row-major(9), w(3), e_p x and y(2)]: 20 entries.
VecX payload_features(const PayloadState& state, const Vec3& e_p);
int payload_feature_dimension();
std::vector<std::string> payload_feature_names();
std::vector<std::string> payload_label_names();

/// [R row-major(9), x(3), r(n), w(3), v(3), rdot(n)].
VecX agent_features(const AgentState& state);
int agent_feature_dimension(int joints);
std::vector<std::string> agent_feature_names(int joints);
std::vector<std::string> agent_label_names(int joints);
/// 6 + n: force (3), base torque (3), joints (n).
int agent_label_channels(int joints);

/// Learning targets from three consecutive samples (k - 1, k, k + 1) spaced by h.
/// `input` and `lambda_hat` are the values acting at sample k (callers average
/// the one-sided values when inputs jump there).
VecX agent_label(const AgentParams& params, const AgentState& prev, const AgentState& cur,
                 const AgentState& next, double h, const AgentInput& input,
                 const std::vector<Vec3>& lambda_hat, const Vec3& gravity);

VecX payload_label(const PayloadParams& nominal, const PayloadState& prev,
                   const PayloadState& cur, const PayloadState& next, double h,
                   const VecX& lambda_hat, const Vec3& gravity);

/// y + N(0, sigma^2 I).
VecX add_label_noise(const VecX& y, double sigma, std::mt19937_64& rng);

}  // namespace grasplab
