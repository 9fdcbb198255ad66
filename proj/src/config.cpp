#include "grasplab/config.hpp"

#include "grasplab/liegroup.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace grasplab {

using nlohmann::json;

VecX EtaProfile::at(double t, int dim) const {
  VecX eta = VecX::Zero(dim);
  if (kind == Kind::Zero || dim == 0) return eta;
  VecX dir = VecX::Zero(dim);
  if (direction.size() == 0) {
    dir(0) = 1.0;
  } else {
    const int n = std::min<int>(dim, static_cast<int>(direction.size()));
    dir.head(n) = direction.head(n);
    if (dir.norm() > 0.0) dir.normalize();
  }
  const double shape = kind == Kind::Constant ? 1.0 : std::sin(2.0 * std::numbers::pi * frequency * t);
  return amplitude * shape * dir;
}

ScenarioConfig ScenarioConfig::defaults() {
  ScenarioConfig c;
  c.agent.base_mass = 1.0;
  c.agent.base_inertia = Vec3(0.01, 0.01, 0.02).asDiagonal();
  const double lz = std::sqrt(35.0) / 6.0;
  for (double side : {1.0, -1.0}) {
    ArmModel a;
    a.link_mass = 0.1;
    a.link_length = 0.3;
    a.mount = Vec3(0.0, 0.1 * side, -0.05);
    a.axis = Vec3::UnitX();
    a.rest_direction = Vec3(0.0, side / 6.0, -lz);
    c.agent.arms.push_back(a);
  }
  c.payload.mass = 1.5;
  // 0.5 x 0.3 x 0.04 m plate
  c.payload.inertia = Vec3(1.5 * (0.09 + 0.0016) / 12.0, 1.5 * (0.25 + 0.0016) / 12.0,
                           1.5 * (0.25 + 0.09) / 12.0)
                          .asDiagonal();
  c.payload.attachments = {Vec3(0.25, 0.15, 0.0), Vec3(0.25, -0.15, 0.0),
                           Vec3(-0.25, 0.15, 0.0), Vec3(-0.25, -0.15, 0.0)};
  c.payload_nominal = c.payload;
  c.gains = PayloadGains::defaults(c.payload_nominal.inertia);
  c.leaders = default_leader_set(c.arms);
  c.reference.kind = Reference::Kind::FigureEight;
  c.reference.center = Vec3(0.0, 0.0, 1.0);
  c.reference.amplitude_x = 1.0;
  c.reference.amplitude_y = 1.0;
  c.reference.period = 10.0;
  c.gp.schedule.update_times = {2.0, 6.0, 10.0};
  c.gp.schedule.budget = 200;
  return c;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a table");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(path, "unknown key '" + it.key() + "'");
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

double get_positive(const json& j, const std::string& path) {
  const double v = get_number(j, path);
  if (!(v > 0.0)) fail(path, "must be positive");
  return v;
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

Vec3 get_vec3(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) fail(path, "expected 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) v(i) = get_number(j[i], path);
  return v;
}

VecX get_vecx(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  VecX v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = get_number(j[i], path);
  return v;
}

/// Either a 3-vector (diagonal) or a 3x3 nested array.
Mat3 get_mat3(const json& j, const std::string& path) {
  if (j.is_array() && j.size() == 3 && j[0].is_number()) return get_vec3(j, path).asDiagonal();
  if (!j.is_array() || j.size() != 3) fail(path, "expected a diagonal or a 3x3 matrix");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = get_vec3(j[r], path).transpose();
  return m;
}

json mat3_json(const Mat3& m) {
  if ((m - Mat3(m.diagonal().asDiagonal())).norm() == 0.0) {
    return json::array({m(0, 0), m(1, 1), m(2, 2)});
  }
  json a = json::array();
  for (int r = 0; r < 3; ++r) a.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return a;
}

json vec_json(const VecX& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

std::string preset_name(AgentDisturbanceField::Preset p) {
  switch (p) {
    case AgentDisturbanceField::Preset::Zero: return "zero";
    case AgentDisturbanceField::Preset::Drag: return "drag";
    case AgentDisturbanceField::Preset::Bias: return "bias";
    case AgentDisturbanceField::Preset::DragBias: return "drag_bias";
  }
  return "zero";
}

void parse_payload(const json& j, PayloadParams& p, const std::string& path, bool attachments) {
  std::set<std::string> keys{"mass", "inertia"};
  if (attachments) keys.insert("attachments");
  check_keys(j, keys, path);
  if (j.contains("mass")) p.mass = get_positive(j["mass"], path + ".mass");
  if (j.contains("inertia")) p.inertia = get_mat3(j["inertia"], path + ".inertia");
  if (attachments && j.contains("attachments")) {
    const json& a = j["attachments"];
    if (!a.is_array()) fail(path + ".attachments", "expected a list of points");
    p.attachments.clear();
    for (const auto& pt : a) p.attachments.push_back(get_vec3(pt, path + ".attachments"));
  }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ScenarioConfig c = defaults();
  bool gains_given = false;
  check_keys(root, {"team", "agent", "payload", "payload_nominal", "gravity", "gains",
                    "agent_gains", "allocation", "disturbance", "reference", "initial", "gp",
                    "integrator", "seed"},
             "config");

  if (root.contains("team")) {
    const json& t = root["team"];
    check_keys(t, {"agents", "arms"}, "team");
    if (t.contains("agents")) c.agents = get_int(t["agents"], "team.agents");
    if (t.contains("arms")) c.arms = get_int(t["arms"], "team.arms");
  }
  if (root.contains("agent")) {
    const json& a = root["agent"];
    check_keys(a, {"base_mass", "base_inertia", "arms"}, "agent");
    if (a.contains("base_mass")) c.agent.base_mass = get_positive(a["base_mass"], "agent.base_mass");
    if (a.contains("base_inertia")) c.agent.base_inertia = get_mat3(a["base_inertia"], "agent.base_inertia");
    if (a.contains("arms")) {
      if (!a["arms"].is_array()) fail("agent.arms", "expected a list");
      c.agent.arms.clear();
      for (const auto& arm_j : a["arms"]) {
        check_keys(arm_j, {"link_mass", "link_length", "mount", "axis", "rest_direction"}, "agent.arms[]");
        ArmModel arm;
        if (arm_j.contains("link_mass")) arm.link_mass = get_positive(arm_j["link_mass"], "agent.arms[].link_mass");
        if (arm_j.contains("link_length")) arm.link_length = get_positive(arm_j["link_length"], "agent.arms[].link_length");
        if (arm_j.contains("mount")) arm.mount = get_vec3(arm_j["mount"], "agent.arms[].mount");
        if (arm_j.contains("axis")) arm.axis = get_vec3(arm_j["axis"], "agent.arms[].axis");
        if (arm_j.contains("rest_direction")) arm.rest_direction = get_vec3(arm_j["rest_direction"], "agent.arms[].rest_direction");
        c.agent.arms.push_back(arm);
      }
    }
  }
  if (root.contains("payload")) {
    parse_payload(root["payload"], c.payload, "payload", true);
    c.payload_nominal.mass = c.payload.mass;
    c.payload_nominal.inertia = c.payload.inertia;
  }
  if (root.contains("payload_nominal")) {
    parse_payload(root["payload_nominal"], c.payload_nominal, "payload_nominal", false);
  }
  c.payload_nominal.attachments = c.payload.attachments;
  if (root.contains("gravity")) c.gravity = get_positive(root["gravity"], "gravity");

  c.gains = PayloadGains::defaults(c.payload_nominal.inertia);
  if (root.contains("gains")) {
    const json& g = root["gains"];
    check_keys(g, {"kp", "kv", "kr", "kw"}, "gains");
    if (g.contains("kp")) c.gains.kp = get_mat3(g["kp"], "gains.kp");
    if (g.contains("kv")) c.gains.kv = get_mat3(g["kv"], "gains.kv");
    if (g.contains("kr")) c.gains.kr = get_mat3(g["kr"], "gains.kr");
    if (g.contains("kw")) c.gains.kw = get_mat3(g["kw"], "gains.kw");
    gains_given = true;
  }
  (void)gains_given;
  if (root.contains("agent_gains")) {
    const json& g = root["agent_gains"];
    check_keys(g, {"k_attitude", "k_rate", "force_weight", "regularization"}, "agent_gains");
    if (g.contains("k_attitude")) c.agent_gains.k_attitude = get_positive(g["k_attitude"], "agent_gains.k_attitude");
    if (g.contains("k_rate")) c.agent_gains.k_rate = get_positive(g["k_rate"], "agent_gains.k_rate");
    if (g.contains("force_weight")) c.agent_gains.force_weight = get_positive(g["force_weight"], "agent_gains.force_weight");
    if (g.contains("regularization")) c.agent_gains.regularization = get_positive(g["regularization"], "agent_gains.regularization");
  }
  c.leaders = default_leader_set(c.arms);
  if (root.contains("allocation")) {
    const json& a = root["allocation"];
    check_keys(a, {"leaders", "basis", "eta"}, "allocation");
    if (a.contains("leaders")) {
      if (!a["leaders"].is_array()) fail("allocation.leaders", "expected a list of contact indices");
      c.leaders.clear();
      for (const auto& l : a["leaders"]) c.leaders.push_back(get_int(l, "allocation.leaders"));
    }
    if (a.contains("basis")) {
      const std::string b = a["basis"].is_string() ? a["basis"].get<std::string>() : "";
      if (b == "grasp") c.basis = InternalForceBasis::Grasp;
      else if (b == "follower") c.basis = InternalForceBasis::Follower;
      else fail("allocation.basis", "expected \"grasp\" or \"follower\"");
    }
    if (a.contains("eta")) {
      const json& e = a["eta"];
      check_keys(e, {"profile", "amplitude", "frequency", "direction"}, "allocation.eta");
      if (e.contains("profile")) {
        const std::string p = e["profile"].is_string() ? e["profile"].get<std::string>() : "";
        if (p == "zero") c.eta.kind = EtaProfile::Kind::Zero;
        else if (p == "constant") c.eta.kind = EtaProfile::Kind::Constant;
        else if (p == "sine") c.eta.kind = EtaProfile::Kind::Sine;
        else fail("allocation.eta.profile", "expected zero, constant or sine");
      }
      if (e.contains("amplitude")) c.eta.amplitude = get_number(e["amplitude"], "allocation.eta.amplitude");
      if (e.contains("frequency")) c.eta.frequency = get_number(e["frequency"], "allocation.eta.frequency");
      if (e.contains("direction")) c.eta.direction = get_vecx(e["direction"], "allocation.eta.direction");
    }
  }
  if (root.contains("disturbance")) {
    const json& d = root["disturbance"];
    check_keys(d, {"preset", "scale", "payload_scale"}, "disturbance");
    if (d.contains("preset")) {
      if (!d["preset"].is_string()) fail("disturbance.preset", "expected a string");
      c.disturbance = d["preset"].get<std::string>();
      AgentDisturbanceField::parse_preset(c.disturbance);
    }
    if (d.contains("scale")) c.disturbance_scale = get_number(d["scale"], "disturbance.scale");
    if (d.contains("payload_scale")) c.payload_disturbance_scale = get_number(d["payload_scale"], "disturbance.payload_scale");
  }
  if (root.contains("reference")) {
    const json& r = root["reference"];
    check_keys(r, {"kind", "center", "amplitude", "period", "attitude"}, "reference");
    if (r.contains("kind")) {
      const std::string k = r["kind"].is_string() ? r["kind"].get<std::string>() : "";
      if (k == "hover") c.reference.kind = Reference::Kind::Hover;
      else if (k == "figure_eight") c.reference.kind = Reference::Kind::FigureEight;
      else fail("reference.kind", "expected hover or figure_eight");
    }
    if (r.contains("center")) c.reference.center = get_vec3(r["center"], "reference.center");
    if (r.contains("amplitude")) {
      const json& a = r["amplitude"];
      if (!a.is_array() || a.size() != 2) fail("reference.amplitude", "expected [A_x, A_y]");
      c.reference.amplitude_x = get_number(a[0], "reference.amplitude");
      c.reference.amplitude_y = get_number(a[1], "reference.amplitude");
    }
    if (r.contains("period")) c.reference.period = get_positive(r["period"], "reference.period");
    if (r.contains("attitude")) c.reference.attitude = exp_so3(get_vec3(r["attitude"], "reference.attitude"));
  }
  if (root.contains("initial")) {
    const json& i = root["initial"];
    check_keys(i, {"position_offset", "rotation"}, "initial");
    if (i.contains("position_offset")) c.initial_offset = get_vec3(i["position_offset"], "initial.position_offset");
    if (i.contains("rotation")) c.initial_rotation = get_vec3(i["rotation"], "initial.rotation");
  }
  if (root.contains("gp")) {
    const json& g = root["gp"];
    check_keys(g, {"noise_sigma", "lambda_noise", "sample_period", "prior_signal_variance",
                   "prior_rkhs_bound", "confidence", "update_times", "budget", "rkhs_scale",
                   "lengthscale_bounds", "restarts", "max_iterations", "fit_samples"},
               "gp");
    if (g.contains("noise_sigma")) c.gp.noise_sigma = get_number(g["noise_sigma"], "gp.noise_sigma");
    if (g.contains("lambda_noise")) c.gp.lambda_noise = get_number(g["lambda_noise"], "gp.lambda_noise");
    if (g.contains("sample_period")) c.gp.sample_period = get_positive(g["sample_period"], "gp.sample_period");
    if (g.contains("prior_signal_variance")) c.gp.schedule.prior_signal_variance = get_positive(g["prior_signal_variance"], "gp.prior_signal_variance");
    if (g.contains("prior_rkhs_bound")) c.gp.schedule.prior_rkhs_bound = get_number(g["prior_rkhs_bound"], "gp.prior_rkhs_bound");
    if (g.contains("confidence")) c.gp.confidence = get_number(g["confidence"], "gp.confidence");
    if (g.contains("update_times")) {
      const VecX t = get_vecx(g["update_times"], "gp.update_times");
      c.gp.schedule.update_times.assign(t.data(), t.data() + t.size());
    }
    if (g.contains("budget")) c.gp.schedule.budget = get_int(g["budget"], "gp.budget");
    if (g.contains("rkhs_scale")) c.gp.schedule.rkhs_scale = get_number(g["rkhs_scale"], "gp.rkhs_scale");
    if (g.contains("lengthscale_bounds")) {
      const VecX b = get_vecx(g["lengthscale_bounds"], "gp.lengthscale_bounds");
      if (b.size() != 2) fail("gp.lengthscale_bounds", "expected [min, max]");
      c.gp.schedule.fit.bounds.lengthscale_min = b(0);
      c.gp.schedule.fit.bounds.lengthscale_max = b(1);
    }
    if (g.contains("restarts")) c.gp.schedule.fit.restarts = get_int(g["restarts"], "gp.restarts");
    if (g.contains("max_iterations")) c.gp.schedule.fit.max_iterations = get_int(g["max_iterations"], "gp.max_iterations");
    if (g.contains("fit_samples")) c.gp.schedule.fit.max_fit_samples = get_int(g["fit_samples"], "gp.fit_samples");
  }
  if (root.contains("integrator")) {
    const json& i = root["integrator"];
    check_keys(i, {"dt", "horizon", "alpha", "projection_period", "log_period"}, "integrator");
    if (i.contains("dt")) c.integrator.dt = get_positive(i["dt"], "integrator.dt");
    if (i.contains("horizon")) c.integrator.horizon = get_positive(i["horizon"], "integrator.horizon");
    if (i.contains("alpha")) c.integrator.alpha = get_number(i["alpha"], "integrator.alpha");
    if (i.contains("projection_period")) c.integrator.projection_period = get_int(i["projection_period"], "integrator.projection_period");
    if (i.contains("log_period")) c.integrator.log_period = get_positive(i["log_period"], "integrator.log_period");
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) {
      fail("seed", "expected a nonnegative integer");
    }
    c.seed = root["seed"].get<std::uint64_t>();
  }
  c.validate();
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string ScenarioConfig::to_json_text() const {
  json root;
  root["team"] = {{"agents", agents}, {"arms", arms}};
  json arms_j = json::array();
  for (const auto& a : agent.arms) {
    arms_j.push_back({{"link_mass", a.link_mass},
                      {"link_length", a.link_length},
                      {"mount", vec_json(a.mount)},
                      {"axis", vec_json(a.axis)},
                      {"rest_direction", vec_json(a.rest_direction)}});
  }
  root["agent"] = {{"base_mass", agent.base_mass},
                   {"base_inertia", mat3_json(agent.base_inertia)},
                   {"arms", arms_j}};
  json att = json::array();
  for (const auto& a : payload.attachments) att.push_back(vec_json(a));
  root["payload"] = {{"mass", payload.mass}, {"inertia", mat3_json(payload.inertia)}, {"attachments", att}};
  root["payload_nominal"] = {{"mass", payload_nominal.mass}, {"inertia", mat3_json(payload_nominal.inertia)}};
  root["gravity"] = gravity;
  root["gains"] = {{"kp", mat3_json(gains.kp)}, {"kv", mat3_json(gains.kv)},
                   {"kr", mat3_json(gains.kr)}, {"kw", mat3_json(gains.kw)}};
  root["agent_gains"] = {{"k_attitude", agent_gains.k_attitude},
                         {"k_rate", agent_gains.k_rate},
                         {"force_weight", agent_gains.force_weight},
                         {"regularization", agent_gains.regularization}};
  const char* profile = eta.kind == EtaProfile::Kind::Zero       ? "zero"
                        : eta.kind == EtaProfile::Kind::Constant ? "constant"
                                                                 : "sine";
  json eta_j = {{"profile", profile}, {"amplitude", eta.amplitude}, {"frequency", eta.frequency}};
  if (eta.direction.size() > 0) eta_j["direction"] = vec_json(eta.direction);
  root["allocation"] = {{"leaders", leaders},
                        {"basis", basis == InternalForceBasis::Grasp ? "grasp" : "follower"},
                        {"eta", eta_j}};
  root["disturbance"] = {{"preset", preset_name(AgentDisturbanceField::parse_preset(disturbance))},
                         {"scale", disturbance_scale},
                         {"payload_scale", payload_disturbance_scale}};
  root["reference"] = {{"kind", reference.kind == Reference::Kind::Hover ? "hover" : "figure_eight"},
                       {"center", vec_json(reference.center)},
                       {"amplitude", {reference.amplitude_x, reference.amplitude_y}},
                       {"period", reference.period},
                       {"attitude", vec_json(Eigen::AngleAxisd(reference.attitude).angle() *
                                             Eigen::AngleAxisd(reference.attitude).axis())}};
  root["initial"] = {{"position_offset", vec_json(initial_offset)}, {"rotation", vec_json(initial_rotation)}};
  const auto& s = gp.schedule;
  root["gp"] = {{"noise_sigma", gp.noise_sigma},
                {"lambda_noise", gp.lambda_noise},
                {"sample_period", gp.sample_period},
                {"prior_signal_variance", s.prior_signal_variance},
                {"prior_rkhs_bound", s.prior_rkhs_bound},
                {"confidence", gp.confidence},
                {"update_times", s.update_times},
                {"budget", s.budget},
                {"rkhs_scale", s.rkhs_scale},
                {"lengthscale_bounds", {s.fit.bounds.lengthscale_min, s.fit.bounds.lengthscale_max}},
                {"restarts", s.fit.restarts},
                {"max_iterations", s.fit.max_iterations},
                {"fit_samples", s.fit.max_fit_samples}};
  root["integrator"] = {{"dt", integrator.dt},
                        {"horizon", integrator.horizon},
                        {"alpha", integrator.alpha},
                        {"projection_period", integrator.projection_period},
                        {"log_period", integrator.log_period}};
  root["seed"] = seed;
  return root.dump(2);
}

void ScenarioConfig::validate() const {
  if (agents < 1) throw ConfigError("team.agents must be >= 1");
  if (arms < 1) throw ConfigError("team.arms must be >= 1");
  if (agent.joint_count() != arms) throw ConfigError("agent.arms must list team.arms arms");
  agent.validate();
  payload.validate();
  payload_nominal.validate();
  if (static_cast<int>(payload.attachments.size()) != agents * arms) {
    throw ConfigError("payload.attachments must hold agents x arms points");
  }
  gains.validate();
  for (int l : leaders) {
    if (l < 0 || l >= agents * arms) throw ConfigError("allocation.leaders index out of range");
  }
  if (!(gp.confidence > 0.0 && gp.confidence < 1.0)) throw ConfigError("gp.confidence must lie in (0, 1)");
  if (gp.noise_sigma < 0.0 || gp.lambda_noise < 0.0) throw ConfigError("gp noise levels must be >= 0");
  if (gp.schedule.budget < 1) throw ConfigError("gp.budget must be >= 1");
  const auto& b = gp.schedule.fit.bounds;
  if (!(b.lengthscale_min > 0.0 && b.lengthscale_min < b.lengthscale_max)) {
    throw ConfigError("gp.lengthscale_bounds must satisfy 0 < min < max");
  }
  for (std::size_t i = 1; i < gp.schedule.update_times.size(); ++i) {
    if (!(gp.schedule.update_times[i] > gp.schedule.update_times[i - 1])) {
      throw ConfigError("gp.update_times must be strictly increasing");
    }
  }
  if (integrator.alpha < 0.0) throw ConfigError("integrator.alpha must be >= 0");
  if (integrator.projection_period < 0) throw ConfigError("integrator.projection_period must be >= 0");
  if (integrator.log_period < integrator.dt) throw ConfigError("integrator.log_period must be >= dt");
  if (reference.period <= 0.0) throw ConfigError("reference.period must be positive");
}

std::vector<AgentParams> ScenarioConfig::agent_params() const {
  return std::vector<AgentParams>(agents, agent);
}

}  // namespace grasplab
