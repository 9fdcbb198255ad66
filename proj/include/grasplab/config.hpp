#pragma once

#include "grasplab/agent_model.hpp"
#include "grasplab/control.hpp"
#include "grasplab/gp.hpp"
#include "grasplab/payload_dae.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace grasplab {

/// Internal-force input eta(t) = amplitude * direction * shape(t), shape = 1
/// (constant) or sin(2 pi f t) (sine).
struct EtaProfile {
  enum class Kind { Zero, Constant, Sine };
  Kind kind = Kind::Zero;
  double amplitude = 0.0;
  double frequency = 0.5;
  VecX direction;  // unit-normalized on use; empty means the first basis vector

  VecX at(double t, int dim) const;
};

struct GpSettings {
  double noise_sigma = 1e-3;      // label measurement noise (std)
  double lambda_noise = 0.0;      // additive noise on the contact-force estimate (std)
  double sample_period = 0.02;    // s between recorded labels
  double confidence = 0.9;        // overall delta, split over the N + 1 models
  ScheduleOptions schedule;
};

struct IntegratorSettings {
  double dt = 1e-3;
  double horizon = 20.0;
  double alpha = 20.0;
  int projection_period = 100;  // steps, 0 disables
  double log_period = 0.01;
};

struct ScenarioConfig {
  int agents = 2;
  int arms = 2;
  AgentParams agent;
  PayloadParams payload;          // plant
  PayloadParams payload_nominal;  // controller
  double gravity = 9.81;

  PayloadGains gains;
  AgentGains agent_gains;
  std::vector<int> leaders;
  InternalForceBasis basis = InternalForceBasis::Grasp;
  EtaProfile eta;

  std::string disturbance = "drag_bias";
  double disturbance_scale = 1.0;
  double payload_disturbance_scale = 1.0;

  Reference reference;
  Vec3 initial_offset = Vec3(0.1, -0.1, 0.05);
  Vec3 initial_rotation = Vec3(0.0, 0.0, 0.1);  // axis-angle of R_L(0) relative to the reference

  GpSettings gp;
  IntegratorSettings integrator;
  std::uint64_t seed = 42;

  static ScenarioConfig defaults();
  /// Parses JSON on top of the defaults. Unknown keys and invalid values throw ConfigError.
  static ScenarioConfig from_json_text(const std::string& text);
  static ScenarioConfig load(const std::string& path);
  std::string to_json_text() const;
  void validate() const;

  Vec3 gravity_vector() const { return Vec3(0.0, 0.0, -gravity); }
  std::vector<AgentParams> agent_params() const;
};

}  // namespace grasplab
