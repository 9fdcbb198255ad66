#include "grasplab/simulation.hpp"

#include "grasplab/labels.hpp"
#include "grasplab/liegroup.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace grasplab {

ExperimentCase ExperimentCase::make(CaseId id) {
  ExperimentCase c;
  c.id = id;
  c.payload_gp = id != CaseId::C1;
  c.agent_gp = id == CaseId::C3;
  return c;
}

ExperimentCase ExperimentCase::parse(const std::string& name) {
  if (name == "C1") return make(CaseId::C1);
  if (name == "C2") return make(CaseId::C2);
  if (name == "C3") return make(CaseId::C3);
  throw ConfigError("unknown case '" + name + "' (expected C1, C2 or C3)");
}

std::string ExperimentCase::name() const {
  switch (id) {
    case CaseId::C1: return "C1";
    case CaseId::C2: return "C2";
    case CaseId::C3: return "C3";
  }
  return "C1";
}

namespace {

// independent stream per randomness source, identical across cases
std::uint64_t derive_seed(std::uint64_t master, std::uint32_t source) {
  std::seed_seq seq{static_cast<std::uint32_t>(master & 0xffffffffu),
                    static_cast<std::uint32_t>(master >> 32), source};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

enum Source : std::uint32_t {
  kPayloadNoise = 1,
  kLambdaNoise = 2,
  kPayloadFit = 3,
  kAgentNoise = 100,
  kAgentFit = 200,
};

AgentWrench wrench_from_mean(const VecX& mean, int joints) {
  AgentWrench w;
  w.force = mean.head<3>();
  w.torque = mean.segment<3>(3);
  w.joint = mean.segment(6, joints);
  return w;
}

double max_sqrt(const VecX& variance) { return std::sqrt(std::max(0.0, variance.maxCoeff())); }

GpSummary summarize(const ScheduledLearner& l) {
  GpSummary s;
  s.params = l.model().params();
  s.rkhs_bound = l.bound().rkhs_bound;
  s.info_gain = l.bound().info_gain;
  s.betas = l.bound().betas;
  s.samples = l.model().size();
  s.stream_samples = l.stream().size();
  return s;
}

AgentInput average(const AgentInput& a, const AgentInput& b) {
  AgentInput o;
  o.thrust = 0.5 * (a.thrust + b.thrust);
  o.torque = 0.5 * (a.torque + b.torque);
  o.joint_torque = 0.5 * (a.joint_torque + b.joint_torque);
  return o;
}

std::string state_dump(const CoupledState& z) {
  std::ostringstream os;
  os << std::setprecision(6) << "payload p = (" << z.payload.p.transpose() << "), v = ("
     << z.payload.v.transpose() << ")";
  for (std::size_t j = 0; j < z.agents.size(); ++j) {
    os << "; agent " << j + 1 << " x = (" << z.agents[j].x.transpose() << "), r = ("
       << z.agents[j].r.transpose() << ")";
  }
  return os.str();
}

// Desired agent attitudes along the reference with zero tracking error. The
// thrust axis depends on the base acceleration, which follows from the grasped
// base positions at neighbouring times; two fixed-point passes starting from a
// rigid grasp. Rates and accelerations by central differences in time.
std::vector<AttitudeFeedforward> attitude_feedforward(
    const ScenarioConfig& cfg, const std::vector<AgentRealization>& realize, const Vec3& g,
    double t, std::vector<std::optional<GraspFrame>>& warm) {
  constexpr double kStep = 5e-3;
  constexpr int kWide = 9;
  const int na = cfg.agents;
  const int n = cfg.arms;
  const int channels = 3 * na * n - 6;

  struct Sample {
    PayloadState ps;
    PayloadAccelerationTarget acc;
    std::vector<std::vector<Vec3>> lambda;
  };
  std::array<Sample, kWide> samples;
  for (int i = 0; i < kWide; ++i) {
    const double tau = t + (i - kWide / 2) * kStep;
    const RefSample ref = cfg.reference.at(tau);
    Sample& sm = samples[i];
    sm.ps.p = ref.p;
    sm.ps.v = ref.v;
    sm.ps.rot = ref.rot;
    sm.ps.omega = ref.omega;
    const WrenchCommand wc =
        wrench_learning(cfg.payload_nominal, sm.ps, ref, cfg.gains, Vec6::Zero(), g);
    const Allocation alloc = allocate(wc.inertial(sm.ps.rot), sm.ps.rot, cfg.payload.attachments,
                                      cfg.leaders, cfg.eta.at(tau, channels), cfg.basis);
    sm.acc = closed_loop_acceleration(cfg.payload_nominal, sm.ps, ref, cfg.gains);
    sm.lambda.assign(na, std::vector<Vec3>(n));
    for (int j = 0; j < na; ++j) {
      for (int b = 0; b < n; ++b) sm.lambda[j][b] = alloc.lambda.segment<3>(3 * (j * n + b));
    }
  }

  auto rate = [](const Rotation& a, const Rotation& b, double span) -> Vec3 {
    const Mat3 rel = a.transpose() * b;
    return vee(0.5 * (rel - rel.transpose())) / span;
  };
  std::vector<AttitudeFeedforward> out(na);
  for (int j = 0; j < na; ++j) {
    const AgentRealization& ar = realize[j];
    auto attitude = [&](int i, const Vec3* base_acc) -> Rotation {
      const Sample& sm = samples[i];
      const std::optional<Rotation> r =
          ar.desired_rotation(sm.lambda[j], sm.ps, sm.acc, nullptr, base_acc);
      return r ? *r : Rotation(sm.ps.rot * ar.grasp().rot);
    };
    std::array<Rotation, kWide> rd;
    for (int i = 0; i < kWide; ++i) rd[i] = attitude(i, nullptr);
    bool exact = true;
    for (int pass = 1; pass <= 2 && exact; ++pass) {
      std::array<Vec3, kWide> x;
      for (int i = pass - 1; i < kWide - pass + 1; ++i) {
        const std::optional<GraspFrame> pose =
            ar.grasped_pose(samples[i].ps, rd[i].col(2), warm[j] ? &*warm[j] : nullptr);
        if (!pose) {
          exact = false;
          break;
        }
        warm[j] = pose;
        x[i] = samples[i].ps.p + samples[i].ps.rot * pose->offset;
      }
      if (!exact) break;
      std::array<Rotation, kWide> next = rd;
      for (int i = pass; i < kWide - pass; ++i) {
        const Vec3 acc = (x[i - 1] - 2.0 * x[i] + x[i + 1]) / (kStep * kStep);
        next[i] = attitude(i, &acc);
      }
      rd = next;
    }
    const int c = kWide / 2;
    const Vec3 w1 = rd[c].transpose() * rd[c - 1] * rate(rd[c - 2], rd[c], 2.0 * kStep);
    const Vec3 w3 = rd[c].transpose() * rd[c + 1] * rate(rd[c], rd[c + 2], 2.0 * kStep);
    out[j].rot = rd[c];
    out[j].omega = rate(rd[c - 1], rd[c + 1], 2.0 * kStep);
    out[j].omega_dot = (w3 - w1) / (2.0 * kStep);
  }
  return out;
}

}  // namespace

CoupledState initial_state(const ScenarioConfig& cfg, const CoupledSystem& system) {
  const RefSample ref = cfg.reference.at(0.0);
  CoupledState z;
  z.payload.p = ref.p + cfg.initial_offset;
  z.payload.v = ref.v;
  z.payload.rot = ref.rot * exp_so3(cfg.initial_rotation);
  z.payload.omega = Vec3::Zero();
  const int n = system.joints();
  for (int j = 0; j < system.agent_count(); ++j) {
    const AgentParams& p = system.agent_params()[j];
    AgentState a = AgentState::at_rest(n);
    a.rot = z.payload.rot;
    // the first arm's tip sits on its attachment, the rest follows from symmetry
    const Vec3 attach = cfg.payload.attachments[j * n];
    a.x = z.payload.p + z.payload.rot * (attach - contact_offset(p, a.r, 0));
    a.v = z.payload.v;
    a.sync_momenta(p);
    z.agents.push_back(a);
  }
  return system.consistent_init(z);
}

Disturbances make_disturbances(const ScenarioConfig& cfg) {
  const auto preset = AgentDisturbanceField::parse_preset(cfg.disturbance);
  Disturbances d;
  for (int j = 0; j < cfg.agents; ++j) {
    d.agents.push_back(AgentDisturbanceField::preset(preset, cfg.arms, cfg.disturbance_scale));
  }
  d.payload = PayloadDisturbanceField::preset(preset, cfg.payload_disturbance_scale);
  return d;
}

double tail_rms(const MetricsLog& log, const std::string& column, double t_from) {
  const int c = log.column(column);
  const int tc = log.column("t");
  if (c < 0 || tc < 0) throw std::out_of_range("no column '" + column + "' in log");
  double sum = 0.0;
  int count = 0;
  for (const auto& r : log.rows) {
    if (r[tc] + 1e-12 < t_from) continue;
    sum += r[c] * r[c];
    ++count;
  }
  return count ? std::sqrt(sum / count) : 0.0;
}

RunResult run_case(const ScenarioConfig& cfg, const ExperimentCase& ec) {
  cfg.validate();
  const Vec3 g = cfg.gravity_vector();
  const CoupledSystem sys(cfg.agent_params(), cfg.payload, g, cfg.integrator.alpha);
  const int na = cfg.agents;
  const int n = cfg.arms;
  const int contacts = na * n;
  const double dt = cfg.integrator.dt;
  const auto steps = static_cast<long>(std::llround(cfg.integrator.horizon / dt));
  const long log_every = std::max(1L, std::lround(cfg.integrator.log_period / dt));
  const long sample_every = std::max(1L, std::lround(cfg.gp.sample_period / dt));
  const long proj_every = cfg.integrator.projection_period;

  CoupledState z = initial_state(cfg, sys);
  const Disturbances dist = make_disturbances(cfg);

  std::vector<AgentRealization> realize;
  for (int j = 0; j < na; ++j) {
    GraspFrame gf;
    gf.rot = z.payload.rot.transpose() * z.agents[j].rot;
    gf.offset = z.payload.rot.transpose() * (z.agents[j].x - z.payload.p);
    gf.joints = z.agents[j].r;
    std::vector<Vec3> att(cfg.payload.attachments.begin() + j * n,
                          cfg.payload.attachments.begin() + (j + 1) * n);
    realize.emplace_back(cfg.agent, gf, att, cfg.agent_gains, g);
  }

  std::vector<std::optional<GraspFrame>> ik_warm(na);

  ScheduleOptions so = cfg.gp.schedule;
  so.delta = split_confidence(cfg.gp.confidence, na + 1);
  ScheduleOptions pso = so;
  pso.fit.seed = derive_seed(cfg.seed, kPayloadFit);
  ScheduledLearner payload_learner(payload_feature_dimension(), 6, pso, payload_feature_names(),
                                   payload_label_names());
  std::vector<ScheduledLearner> agent_learners;
  for (int j = 0; j < na; ++j) {
    ScheduleOptions aso = so;
    aso.fit.seed = derive_seed(cfg.seed, kAgentFit + j);
    agent_learners.emplace_back(agent_feature_dimension(n), agent_label_channels(n), aso,
                                agent_feature_names(n), agent_label_names(n));
  }
  std::mt19937_64 payload_noise(derive_seed(cfg.seed, kPayloadNoise));
  std::mt19937_64 lambda_noise(derive_seed(cfg.seed, kLambdaNoise));
  std::vector<std::mt19937_64> agent_noise;
  for (int j = 0; j < na; ++j) agent_noise.emplace_back(derive_seed(cfg.seed, kAgentNoise + j));
  std::normal_distribution<double> normal(0.0, 1.0);

  RunResult res;
  res.log.columns = MetricsLog::schema(na, n);
  RunSummary& sum = res.summary;
  sum.case_name = ec.name();
  sum.horizon = cfg.integrator.horizon;
  sum.static_share = cfg.payload.mass * cfg.gravity / contacts;

  const std::vector<double>& updates = cfg.gp.schedule.update_times;
  std::size_t next_interval = 0;
  double t_k = 0.0;
  double e_lambda_k = -1.0;  // captured at the first step of each interval

  CoupledState z_prev = z;
  std::vector<AgentInput> inputs_prev;
  std::vector<double> last_vertical(contacts, 0.0);
  VecX lambda_app;

  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;

    if (ec.payload_gp && payload_learner.due(t)) payload_learner.update(t);
    if (ec.agent_gp) {
      for (auto& l : agent_learners) {
        if (l.due(t)) l.update(t);
      }
    }
    while (next_interval < updates.size() && t + 1e-12 >= updates[next_interval]) {
      t_k = updates[next_interval++];
      e_lambda_k = -1.0;
    }

    // payload layer
    const RefSample ref = cfg.reference.at(t);
    const PayloadErrors err = payload_errors(z.payload, ref);
    const VecX pf = payload_features(z.payload, err.e_p);
    Vec6 payload_mean = Vec6::Zero();
    if (ec.payload_gp) payload_mean = payload_learner.model().mean(pf);
    const WrenchCommand wc =
        wrench_learning(cfg.payload_nominal, z.payload, ref, cfg.gains, payload_mean, g);
    const Vec6 w_inertial = wc.inertial(z.payload.rot);
    const VecX eta = cfg.eta.at(t, 3 * contacts - 6);
    const Allocation alloc = allocate(w_inertial, z.payload.rot, cfg.payload.attachments,
                                      cfg.leaders, eta, cfg.basis);
    const PayloadAccelerationTarget acc =
        closed_loop_acceleration(cfg.payload_nominal, z.payload, ref, cfg.gains);

    // agent layer
    std::vector<VecX> agent_feats;
    std::vector<AgentWrench> f_hat(na);
    std::vector<const AgentWrench*> f_ptr(na, nullptr);
    for (int j = 0; j < na; ++j) {
      agent_feats.push_back(agent_features(z.agents[j]));
      if (ec.agent_gp) {
        f_hat[j] = wrench_from_mean(agent_learners[j].model().mean(agent_feats.back()), n);
        f_ptr[j] = &f_hat[j];
      }
    }
    const std::vector<AttitudeFeedforward> ff = attitude_feedforward(cfg, realize, g, t, ik_warm);
    std::vector<AgentInput> inputs;
    for (int j = 0; j < na; ++j) {
      std::vector<Vec3> lc(n);
      for (int b = 0; b < n; ++b) lc[b] = alloc.lambda.segment<3>(3 * (j * n + b));
      const AgentCommand cmd = realize[j].compute(z.agents[j], lc, z.payload, acc, f_ptr[j], &ff[j]);
      inputs.push_back(cmd.input);
    }
    if (inputs_prev.empty()) inputs_prev = inputs;

    CoupledState z_next;
    try {
      z_next = sys.step(z, inputs, dist, dt, &lambda_app);
      if (proj_every > 0 && (k + 1) % proj_every == 0) {
        sum.max_phi = std::max(sum.max_phi, sys.grasp_constraints(z_next).norm());
        sum.max_phi_dot = std::max(sum.max_phi_dot, sys.constraint_velocity(z_next).norm());
        sys.project(z_next);
      }
    } catch (const SolverError& e) {
      std::ostringstream os;
      os << "solver failure at t = " << t << " s: " << e.what() << " [" << state_dump(z) << "]";
      throw SolverError(os.str());
    }
    if (!z_next.payload.p.allFinite()) {
      throw SolverError("non-finite state at t = " + format_double(t) + " s [" + state_dump(z) + "]");
    }

    const MatX gm = grasp_matrix(z.payload.rot, cfg.payload.attachments);
    const RealizationDiagnostics diag = wrench_mismatch(lambda_app, alloc.lambda, w_inertial, gm);
    if (e_lambda_k < 0.0) e_lambda_k = diag.e_lambda.norm();
    for (int c = 0; c < contacts; ++c) {
      const Vec3 lc = lambda_app.segment<3>(3 * c);
      sum.max_contact_force = std::max(sum.max_contact_force, lc.norm());
      if (lc.z() != 0.0) {
        if (last_vertical[c] != 0.0 && (lc.z() > 0.0) != (last_vertical[c] > 0.0)) {
          ++sum.vertical_sign_changes;
        }
        last_vertical[c] = lc.z();
      }
    }

    // labels at sample instants (central differences need z_{k+1})
    if (k >= 1 && k % sample_every == 0) {
      const VecX lambda_left = sys.solve_contact_forces(z, inputs_prev, dist).lambda;
      VecX lambda_hat = 0.5 * (lambda_left + lambda_app);
      if (cfg.gp.lambda_noise > 0.0) {
        for (int i = 0; i < lambda_hat.size(); ++i) lambda_hat(i) += cfg.gp.lambda_noise * normal(lambda_noise);
      }
      const VecX yl = payload_label(cfg.payload_nominal, z_prev.payload, z.payload, z_next.payload,
                                    dt, lambda_hat, g);
      payload_learner.record(pf, add_label_noise(yl, cfg.gp.noise_sigma, payload_noise));
      for (int j = 0; j < na; ++j) {
        std::vector<Vec3> lh(n);
        for (int b = 0; b < n; ++b) lh[b] = lambda_hat.segment<3>(3 * (j * n + b));
        const VecX ya = agent_label(cfg.agent, z_prev.agents[j], z.agents[j], z_next.agents[j], dt,
                                    average(inputs_prev[j], inputs[j]), lh, g);
        agent_learners[j].record(agent_feats[j], add_label_noise(ya, cfg.gp.noise_sigma, agent_noise[j]));
      }
    }

    if (k % log_every == 0) {
      VecX var;
      var = payload_learner.model().variance(pf);
      const double sigma_l = max_sqrt(var);
      double sigma_a = 0.0;
      std::vector<double> rho_j;
      for (int j = 0; j < na; ++j) {
        const VecX v = agent_learners[j].model().variance(agent_feats[j]);
        sigma_a += max_sqrt(v);
        rho_j.push_back(rho_from_variance(agent_learners[j].bound(), v));
      }
      std::vector<double> row{t, err.e_p.norm(), err.e_v.norm(), err.e_r.norm(), err.e_omega.norm(),
                              err.psi, diag.delta_w.norm(), sigma_l, sigma_a};
      for (int c = 0; c < contacts; ++c) row.push_back(lambda_app.segment<3>(3 * c).norm());
      row.push_back(eta.norm());
      row.push_back(sys.grasp_constraints(z).norm());
      res.log.rows.push_back(std::move(row));
      res.interface.push_back({t, t_k, diag.delta_w.norm(), e_lambda_k, rho_j});
    }

    sum.max_phi = std::max(sum.max_phi, sys.grasp_constraints(z_next).norm());
    sum.max_phi_dot = std::max(sum.max_phi_dot, sys.constraint_velocity(z_next).norm());

    z_prev = std::move(z);
    z = std::move(z_next);
    inputs_prev = std::move(inputs);
  }

  const double t_from = 0.75 * cfg.integrator.horizon;
  for (std::size_t c = 1; c < res.log.columns.size(); ++c) {
    sum.rms[res.log.columns[c]] = tail_rms(res.log, res.log.columns[c], t_from);
  }
  sum.interface = fit_interface_constants(res.interface);
  sum.payload_gp = summarize(payload_learner);
  for (const auto& l : agent_learners) sum.agent_gp.push_back(summarize(l));
  res.final_state = z;
  res.payload_data = payload_learner.frozen();
  for (const auto& l : agent_learners) res.agent_data.push_back(l.frozen());
  return res;
}

std::string summary_text(const RunSummary& s) {
  std::ostringstream os;
  auto kv = [&](const std::string& k, double v) { os << k << " = " << format_double(v) << '\n'; };
  os << "case = " << s.case_name << '\n';
  kv("horizon", s.horizon);
  for (const auto& [k, v] : s.rms) kv("rms_" + k, v);
  kv("max_phi", s.max_phi);
  kv("max_phi_dot", s.max_phi_dot);
  kv("max_contact_force", s.max_contact_force);
  kv("static_share", s.static_share);
  os << "vertical_sign_changes = " << s.vertical_sign_changes << '\n';
  kv("alpha_W", s.interface.alpha);
  kv("gamma_W", s.interface.gamma);
  kv("theta_W", s.interface.theta);
  for (std::size_t j = 0; j < s.interface.kappa.size(); ++j) {
    kv("kappa_" + std::to_string(j + 1), s.interface.kappa[j]);
  }
  kv("interface_rms_residual", s.interface.rms_residual);
  kv("interface_coverage", s.interface.coverage);
  auto gp = [&](const std::string& prefix, const GpSummary& g) {
    os << prefix << "_samples = " << g.samples << '\n';
    os << prefix << "_stream_samples = " << g.stream_samples << '\n';
    kv(prefix + "_rkhs_bound", g.rkhs_bound);
    for (std::size_t c = 0; c < g.params.size(); ++c) {
      const std::string ch = prefix + "_ch" + std::to_string(c + 1);
      kv(ch + "_signal_variance", g.params[c].signal_variance);
      kv(ch + "_noise_variance", g.params[c].noise_variance);
      os << ch << "_lengthscales =";
      for (int d = 0; d < g.params[c].lengthscales.size(); ++d) {
        os << ' ' << format_double(g.params[c].lengthscales(d));
      }
      os << '\n';
      if (c < static_cast<std::size_t>(g.betas.size())) kv(ch + "_beta", g.betas(static_cast<int>(c)));
      if (c < static_cast<std::size_t>(g.info_gain.size())) {
        kv(ch + "_info_gain", g.info_gain(static_cast<int>(c)));
      }
    }
  };
  gp("gp_payload", s.payload_gp);
  for (std::size_t j = 0; j < s.agent_gp.size(); ++j) gp("gp_agent_" + std::to_string(j + 1), s.agent_gp[j]);
  return os.str();
}

MetricsLog interface_log(const std::vector<InterfaceSample>& samples, int agents) {
  MetricsLog log;
  log.columns = {"t", "t_k", "dW", "e_lambda_k"};
  for (int j = 1; j <= agents; ++j) log.columns.push_back("rho_" + std::to_string(j));
  for (const auto& s : samples) {
    std::vector<double> row{s.t, s.t_k, s.delta_w, s.e_lambda_k};
    for (int j = 0; j < agents; ++j) row.push_back(j < static_cast<int>(s.rho.size()) ? s.rho[j] : 0.0);
    log.rows.push_back(std::move(row));
  }
  return log;
}

std::vector<InterfaceSample> interface_samples_from_log(const MetricsLog& log) {
  for (const char* c : {"t", "t_k", "dW", "e_lambda_k"}) {
    if (log.column(c) < 0) throw std::runtime_error(std::string("interface log lacks column '") + c + "'");
  }
  std::vector<int> rho_cols;
  for (std::size_t c = 0; c < log.columns.size(); ++c) {
    if (log.columns[c].rfind("rho_", 0) == 0) rho_cols.push_back(static_cast<int>(c));
  }
  std::vector<InterfaceSample> out;
  for (const auto& r : log.rows) {
    InterfaceSample s{r[log.column("t")], r[log.column("t_k")], r[log.column("dW")],
                      r[log.column("e_lambda_k")], {}};
    for (int c : rho_cols) s.rho.push_back(r[c]);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

std::string dataset_csv(const Dataset& d) {
  std::ostringstream os;
  d.write_csv(os);
  return os.str();
}

}  // namespace

void write_run(const std::filesystem::path& dir, const RunResult& r) {
  write_log_file(dir / "metrics.csv", r.log);
  write_log_file(dir / "interface.csv",
                 interface_log(r.interface, static_cast<int>(r.summary.agent_gp.size())));
  write_text_file(dir / "summary.txt", summary_text(r.summary));
  write_text_file(dir / "gp_payload.csv", dataset_csv(r.payload_data));
  for (std::size_t j = 0; j < r.agent_data.size(); ++j) {
    write_text_file(dir / ("gp_agent_" + std::to_string(j + 1) + ".csv"), dataset_csv(r.agent_data[j]));
  }
}

namespace {

const std::vector<std::string> kComparisonColumns{
    "rms_e_p", "rms_e_v", "rms_e_R", "rms_e_omega", "rms_Psi", "rms_dW", "rms_sigma_L",
    "rms_sigma_A", "max_phi", "max_phi_dot", "alpha_W", "gamma_W", "theta_W"};

std::vector<double> comparison_row(const RunSummary& s) {
  std::vector<double> v;
  for (const char* k : {"e_p", "e_v", "e_R", "e_omega", "Psi", "dW", "sigma_L", "sigma_A"}) {
    v.push_back(s.rms.at(k));
  }
  v.push_back(s.max_phi);
  v.push_back(s.max_phi_dot);
  v.push_back(s.interface.alpha);
  v.push_back(s.interface.gamma);
  v.push_back(s.interface.theta);
  for (double k : s.interface.kappa) v.push_back(k);
  return v;
}

std::vector<std::string> comparison_header(const MatrixResult& m) {
  std::vector<std::string> h{"case"};
  h.insert(h.end(), kComparisonColumns.begin(), kComparisonColumns.end());
  const std::size_t agents = m.runs.empty() ? 0 : m.runs.front().summary.interface.kappa.size();
  for (std::size_t j = 1; j <= agents; ++j) h.push_back("kappa_" + std::to_string(j));
  return h;
}

// one figure bundle: time column plus one column per (case, metric)
std::string figure_csv(const MatrixResult& m, const std::vector<std::string>& metrics,
                       const std::vector<std::size_t>& cases) {
  std::vector<std::string> header{"t"};
  for (std::size_t c : cases) {
    for (const auto& k : metrics) header.push_back(k + "_" + m.runs[c].summary.case_name);
  }
  const MetricsLog& ref = m.runs[cases.front()].log;
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < ref.rows.size(); ++i) {
    std::vector<double> row{ref.rows[i][0]};
    for (std::size_t c : cases) {
      const MetricsLog& l = m.runs[c].log;
      for (const auto& k : metrics) row.push_back(l.rows[i][l.column(k)]);
    }
    rows.push_back(std::move(row));
  }
  std::ostringstream os;
  write_csv(os, header, rows);
  return os.str();
}

}  // namespace

std::string comparison_text(const MatrixResult& m) {
  const auto header = comparison_header(m);
  std::ostringstream os;
  os << std::left << std::setw(6) << header[0];
  for (std::size_t i = 1; i < header.size(); ++i) os << std::right << std::setw(14) << header[i];
  os << '\n';
  for (const auto& r : m.runs) {
    os << std::left << std::setw(6) << r.summary.case_name;
    for (double v : comparison_row(r.summary)) {
      std::ostringstream cell;
      cell << std::setprecision(4) << std::scientific << v;
      os << std::right << std::setw(14) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

void write_matrix(const std::filesystem::path& dir, const MatrixResult& m) {
  for (const auto& r : m.runs) write_run(dir / r.summary.case_name, r);
  const auto header = comparison_header(m);
  std::ostringstream csv;
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << '\n';
  for (const auto& r : m.runs) {
    csv << r.summary.case_name;
    for (double v : comparison_row(r.summary)) csv << ',' << format_double(v);
    csv << '\n';
  }
  write_text_file(dir / "comparison.csv", csv.str());
  write_text_file(dir / "comparison.txt", comparison_text(m));
  if (m.runs.size() == 3) {
    write_text_file(dir / "fig1_tracking.csv", figure_csv(m, {"e_p", "Psi"}, {0, 1, 2}));
    write_text_file(dir / "fig2_interface.csv", figure_csv(m, {"dW"}, {0, 1, 2}));
    write_text_file(dir / "fig3_uncertainty.csv", figure_csv(m, {"sigma_L", "sigma_A"}, {0, 1, 2}));
    std::vector<std::string> forces;
    for (const auto& c : m.runs.front().log.columns) {
      if (c.rfind("lam_", 0) == 0) forces.push_back(c);
    }
    forces.push_back("eta");
    write_text_file(dir / "fig4_forces.csv", figure_csv(m, forces, {2}));
  }
}

MatrixResult run_matrix(const ScenarioConfig& cfg, const std::filesystem::path& out_dir) {
  MatrixResult m;
  for (CaseId id : {CaseId::C1, CaseId::C2, CaseId::C3}) {
    m.runs.push_back(run_case(cfg, ExperimentCase::make(id)));
  }
  if (!out_dir.empty()) write_matrix(out_dir, m);
  return m;
}

ExactRun simulate_exact(const ScenarioConfig& cfg, const EtaProfile& eta_profile,
                        const ExactOptions& opts) {
  cfg.validate();
  const Vec3 g = cfg.gravity_vector();
  const CoupledSystem sys(cfg.agent_params(), cfg.payload, g, cfg.integrator.alpha);
  const int contacts = cfg.agents * cfg.arms;
  const double dt = cfg.integrator.dt;
  const auto steps = static_cast<long>(std::llround(opts.horizon / dt));
  const long log_every = std::max(1L, std::lround(cfg.integrator.log_period / dt));
  const PayloadDisturbanceField dist =
      opts.disturbed ? make_disturbances(cfg).payload : PayloadDisturbanceField{};

  ExactRun out;
  out.log.columns = MetricsLog::schema(cfg.agents, cfg.arms);

  struct Eval {
    PayloadDerivative d;
    VecX lambda;
    Vec6 w;
  };
  auto f = [&](double t, const PayloadState& s) {
    const RefSample ref = cfg.reference.at(t);
    const WrenchCommand wc = wrench_nominal(cfg.payload_nominal, s, ref, cfg.gains, g);
    Eval e;
    e.w = wc.inertial(s.rot);
    const Allocation a = allocate(e.w, s.rot, cfg.payload.attachments, cfg.leaders,
                                  eta_profile.at(t, 3 * contacts - 6), cfg.basis);
    e.lambda = a.lambda;
    const Vec6 applied = grasp_matrix(s.rot, cfg.payload.attachments) * a.lambda;
    out.max_wrench_residual = std::max(out.max_wrench_residual, (applied - e.w).norm());
    e.d = payload_rhs(cfg.payload, s, a.lambda, dist.evaluate(s), g);
    return e;
  };

  PayloadState s = initial_state(cfg, sys).payload;
  for (long k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    const Eval e1 = f(t, s);
    if (k % log_every == 0) {
      const RefSample ref = cfg.reference.at(t);
      const PayloadErrors err = payload_errors(s, ref);
      const VecX eta = eta_profile.at(t, 3 * contacts - 6);
      std::vector<double> row{t, err.e_p.norm(), err.e_v.norm(), err.e_r.norm(), err.e_omega.norm(),
                              err.psi, (grasp_matrix(s.rot, cfg.payload.attachments) * e1.lambda - e1.w).norm(),
                              0.0, 0.0};
      for (int c = 0; c < contacts; ++c) row.push_back(e1.lambda.segment<3>(3 * c).norm());
      row.push_back(eta.norm());
      row.push_back(0.0);
      out.log.rows.push_back(std::move(row));
      out.poses.push_back(s);
      out.lambda.push_back(e1.lambda);
    }
    if (k == steps) break;
    const Eval e2 = f(t + 0.5 * dt, advance(s, e1.d, 0.5 * dt));
    const Eval e3 = f(t + 0.5 * dt, advance(s, e2.d, 0.5 * dt));
    const Eval e4 = f(t + dt, advance(s, e3.d, dt));
    PayloadDerivative d;
    d.p_dot = (e1.d.p_dot + 2.0 * e2.d.p_dot + 2.0 * e3.d.p_dot + e4.d.p_dot) / 6.0;
    d.v_dot = (e1.d.v_dot + 2.0 * e2.d.v_dot + 2.0 * e3.d.v_dot + e4.d.v_dot) / 6.0;
    d.rot_dot = (e1.d.rot_dot + 2.0 * e2.d.rot_dot + 2.0 * e3.d.rot_dot + e4.d.rot_dot) / 6.0;
    d.omega_dot = (e1.d.omega_dot + 2.0 * e2.d.omega_dot + 2.0 * e3.d.omega_dot + e4.d.omega_dot) / 6.0;
    s = advance(s, d, dt);
    if (orthonormality_residual(s.rot) > 1e-9) s.rot = project_to_so3(s.rot);
  }
  return out;
}

EtaStudy eta_experiment(const ScenarioConfig& cfg, const EtaProfile& eta, double horizon) {
  EtaStudy st;
  ExactOptions o;
  o.horizon = horizon;
  st.baseline = simulate_exact(cfg, EtaProfile{}, o);
  st.active = simulate_exact(cfg, eta, o);
  const int eta_col = st.active.log.column("eta");
  for (std::size_t i = 0; i < st.baseline.poses.size(); ++i) {
    const PayloadState& a = st.baseline.poses[i];
    const PayloadState& b = st.active.poses[i];
    const double dp = (a.p - b.p).norm();
    const double dr = (a.rot - b.rot).norm();
    st.max_pose_divergence = std::max(st.max_pose_divergence, std::max(dp, dr));
    st.max_lambda_difference =
        std::max(st.max_lambda_difference, (st.baseline.lambda[i] - st.active.lambda[i]).norm());
    st.max_eta = std::max(st.max_eta, st.active.log.rows[i][eta_col]);
  }
  st.max_wrench_residual = std::max(st.baseline.max_wrench_residual, st.active.max_wrench_residual);
  return st;
}

std::vector<Check> validate_suite(const ScenarioConfig& cfg) {
  std::vector<Check> out;
  auto add = [&](const std::string& name, bool pass, double value) {
    out.push_back({name, pass, format_double(value)});
  };

  const ScenarioConfig again = ScenarioConfig::from_json_text(cfg.to_json_text());
  out.push_back({"config round trip", again.to_json_text() == cfg.to_json_text(), ""});

  const Vec3 v(0.3, -1.2, 2.5);
  add("hat/vee round trip", (vee(hat(v)) - v).norm() == 0.0, (vee(hat(v)) - v).norm());

  const CoupledSystem sys(cfg.agent_params(), cfg.payload, cfg.gravity_vector(), cfg.integrator.alpha);
  const CoupledState z = initial_state(cfg, sys);
  add("initial grasp constraints", sys.grasp_constraints(z).norm() <= 1e-9,
      sys.grasp_constraints(z).norm());
  add("initial constraint velocity", sys.constraint_velocity(z).norm() <= 1e-9,
      sys.constraint_velocity(z).norm());

  std::vector<AgentInput> hover;
  for (int j = 0; j < cfg.agents; ++j) {
    AgentInput u = AgentInput::zero(cfg.arms);
    u.thrust = (cfg.agent.total_mass() + cfg.payload.mass / cfg.agents) * cfg.gravity;
    hover.push_back(u);
  }
  const Disturbances dist = make_disturbances(cfg);
  const VecX l_fast = sys.solve_contact_forces(z, hover, dist).lambda;
  const VecX l_dense = sys.solve_contact_forces_dense(z, hover, dist);
  const double kkt = (l_fast - l_dense).norm() / std::max(1.0, l_dense.norm());
  add("contact solve vs dense KKT", kkt <= 1e-9, kkt);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst = 0.0;
  const int contacts = cfg.agents * cfg.arms;
  for (int i = 0; i < 200; ++i) {
    const Rotation r = exp_so3(Vec3(nd(rng), nd(rng), nd(rng)));
    Vec6 w;
    for (int c = 0; c < 6; ++c) w(c) = 10.0 * nd(rng);
    VecX eta(3 * contacts - 6);
    for (int c = 0; c < eta.size(); ++c) eta(c) = 5.0 * nd(rng);
    const Allocation a = allocate(w, r, cfg.payload.attachments, cfg.leaders, eta, cfg.basis);
    worst = std::max(worst, (grasp_matrix(r, cfg.payload.attachments) * a.lambda - w).norm());
  }
  add("allocation wrench identity", worst <= 1e-9, worst);

  ScenarioConfig shortc = cfg;
  shortc.integrator.horizon = std::min(1.0, cfg.integrator.horizon);
  shortc.gp.schedule.update_times.clear();
  const RunResult r = run_case(shortc, ExperimentCase::make(CaseId::C1));
  add("closed-loop constraint drift (1 s)", r.summary.max_phi <= 1e-6, r.summary.max_phi);
  bool finite = true;
  for (const auto& row : r.log.rows) {
    for (double x : row) finite = finite && std::isfinite(x);
  }
  out.push_back({"log entries finite", finite, ""});
  return out;
}

}  // namespace grasplab
