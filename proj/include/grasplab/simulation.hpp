#pragma once

#include "grasplab/config.hpp"
#include "grasplab/emit.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace grasplab {

enum class CaseId { C1, C2, C3 };

/// C1 = no learning, C2 = payload GP, C3 = payload and agent GPs.
struct ExperimentCase {
  CaseId id = CaseId::C1;
  bool payload_gp = false;
  bool agent_gp = false;

  static ExperimentCase make(CaseId id);
  /// "C1", "C2" or "C3"; anything else throws ConfigError.
  static ExperimentCase parse(const std::string& name);
  std::string name() const;
};

struct GpSummary {
  std::vector<KernelParams> params;
  double rkhs_bound = 0.0;
  VecX info_gain;
  VecX betas;
  int samples = 0;
  int stream_samples = 0;
};

struct RunSummary {
  std::string case_name;
  double horizon = 0.0;
  /// RMS of every logged metric over the last quarter of the horizon.
  std::map<std::string, double> rms;
  double max_phi = 0.0;
  double max_phi_dot = 0.0;
  double max_contact_force = 0.0;
  double static_share = 0.0;      // m_L g / contacts
  int vertical_sign_changes = 0;  // summed over contacts
  double max_contact_residual = 0.0;
  InterfaceConstants interface;
  GpSummary payload_gp;
  std::vector<GpSummary> agent_gp;
};

struct RunResult {
  MetricsLog log;
  RunSummary summary;
  std::vector<InterfaceSample> interface;
  CoupledState final_state;
  Dataset payload_data;
  std::vector<Dataset> agent_data;
};

/// Payload pose from the reference and the configured initial offsets, agents
/// placed on their nominal grasp, then made consistent.
CoupledState initial_state(const ScenarioConfig& cfg, const CoupledSystem& system);

Disturbances make_disturbances(const ScenarioConfig& cfg);

/// Closed-loop coupled simulation. SolverError messages carry the failure time.
RunResult run_case(const ScenarioConfig& cfg, const ExperimentCase& c);

/// RMS over rows with t >= t_from.
double tail_rms(const MetricsLog& log, const std::string& column, double t_from);

/// Flat key = value run summary.
std::string summary_text(const RunSummary& s);
MetricsLog interface_log(const std::vector<InterfaceSample>& samples, int agents);
std::vector<InterfaceSample> interface_samples_from_log(const MetricsLog& log);

/// metrics.csv, interface.csv, summary.txt and the frozen GP datasets.
void write_run(const std::filesystem::path& dir, const RunResult& r);

struct MatrixResult {
  std::vector<RunResult> runs;  // C1, C2, C3
};

/// Runs C1, C2, C3; writes per-case directories, comparison.csv/.txt and
/// figure bundles when `out_dir` is not empty.
MatrixResult run_matrix(const ScenarioConfig& cfg, const std::filesystem::path& out_dir);
std::string comparison_text(const MatrixResult& m);
void write_matrix(const std::filesystem::path& dir, const MatrixResult& m);

/// Payload alone driven by G lambda_cmd (the realization layer is bypassed),
/// controller evaluated at every RK4 stage.
struct ExactRun {
  MetricsLog log;
  std::vector<PayloadState> poses;  // at log instants
  std::vector<VecX> lambda;         // commanded = applied
  double max_wrench_residual = 0.0; // |G lambda - W| over all stages
};

struct ExactOptions {
  double horizon = 10.0;
  bool disturbed = false;
};

ExactRun simulate_exact(const ScenarioConfig& cfg, const EtaProfile& eta, const ExactOptions& opts);

struct EtaStudy {
  ExactRun baseline;
  ExactRun active;
  double max_pose_divergence = 0.0;
  double max_lambda_difference = 0.0;
  double max_eta = 0.0;
  double max_wrench_residual = 0.0;
};

/// Paired exact-realization runs with eta = 0 and with `eta`.
EtaStudy eta_experiment(const ScenarioConfig& cfg, const EtaProfile& eta, double horizon);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// Fast invariant checks on a configuration.
std::vector<Check> validate_suite(const ScenarioConfig& cfg);

}  // namespace grasplab
