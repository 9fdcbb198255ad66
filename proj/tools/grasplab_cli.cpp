#include "grasplab/simulation.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <sstream>

using namespace grasplab;

namespace {

struct Common {
  std::string config;
  std::string case_name = "C3";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = "results";
  double horizon = 0.0;
  double dt = 0.0;
};

void add_common(CLI::App* app, Common& c, bool with_case) {
  app->add_option("--config", c.config, "JSON scenario file (defaults apply when omitted)");
  if (with_case) app->add_option("--case", c.case_name, "C1, C2 or C3");
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](const std::uint64_t& s) { c.seed = s; c.seed_set = true; }, "master RNG seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--horizon", c.horizon, "simulated time [s]");
  app->add_option("--dt", c.dt, "integration step [s]");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = c.config.empty() ? ScenarioConfig::defaults() : ScenarioConfig::load(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (c.horizon > 0.0) cfg.integrator.horizon = c.horizon;
  if (c.dt > 0.0) cfg.integrator.dt = c.dt;
  cfg.validate();
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grasplab: cooperative aerial transport simulator"};
  app.require_subcommand(1);
  Common c;
  std::string log_path;

  auto* run = app.add_subcommand("run", "simulate one case");
  add_common(run, c, true);
  auto* matrix = app.add_subcommand("matrix", "simulate C1, C2 and C3");
  add_common(matrix, c, false);
  auto* eta = app.add_subcommand("eta", "paired internal-force runs with exact realization");
  add_common(eta, c, false);
  auto* validate = app.add_subcommand("validate", "invariant checks on a configuration");
  add_common(validate, c, false);
  auto* fit = app.add_subcommand("fit-interface", "fit interface constants from interface.csv");
  fit->add_option("--log", log_path, "interface.csv written by run or matrix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const auto t0 = std::chrono::steady_clock::now();
    if (*run) {
      const ScenarioConfig cfg = load(c);
      const RunResult r = run_case(cfg, ExperimentCase::parse(c.case_name));
      const std::filesystem::path dir = std::filesystem::path(c.out) / r.summary.case_name;
      write_run(dir, r);
      std::cout << summary_text(r.summary) << "wrote " << dir.string() << " in "
                << seconds_since(t0) << " s\n";
    } else if (*matrix) {
      const ScenarioConfig cfg = load(c);
      const MatrixResult m = run_matrix(cfg, c.out);
      std::cout << comparison_text(m) << "wrote " << c.out << " in " << seconds_since(t0) << " s\n";
    } else if (*eta) {
      const ScenarioConfig cfg = load(c);
      EtaProfile profile = cfg.eta;
      if (profile.kind == EtaProfile::Kind::Zero || profile.amplitude == 0.0) {
        profile.kind = EtaProfile::Kind::Sine;
        profile.amplitude = 2.0;
      }
      const double horizon = c.horizon > 0.0 ? c.horizon : 10.0;
      const EtaStudy st = eta_experiment(cfg, profile, horizon);
      const std::filesystem::path dir(c.out);
      write_log_file(dir / "eta_baseline.csv", st.baseline.log);
      write_log_file(dir / "eta_active.csv", st.active.log);
      std::cout << "max_pose_divergence = " << format_double(st.max_pose_divergence) << '\n'
                << "max_lambda_difference = " << format_double(st.max_lambda_difference) << '\n'
                << "max_eta = " << format_double(st.max_eta) << '\n'
                << "max_wrench_residual = " << format_double(st.max_wrench_residual) << '\n';
    } else if (*validate) {
      const ScenarioConfig cfg = load(c);
      bool ok = true;
      for (const Check& ch : validate_suite(cfg)) {
        std::cout << (ch.pass ? "PASS " : "FAIL ") << ch.name;
        if (!ch.detail.empty()) std::cout << " (" << ch.detail << ")";
        std::cout << '\n';
        ok = ok && ch.pass;
      }
      return ok ? 0 : 2;
    } else if (*fit) {
      const MetricsLog log = read_log_file(log_path);
      const InterfaceConstants k = fit_interface_constants(interface_samples_from_log(log));
      std::cout << "alpha_W = " << format_double(k.alpha) << '\n'
                << "gamma_W = " << format_double(k.gamma) << '\n'
                << "theta_W = " << format_double(k.theta) << '\n';
      for (std::size_t j = 0; j < k.kappa.size(); ++j) {
        std::cout << "kappa_" << j + 1 << " = " << format_double(k.kappa[j]) << '\n';
      }
      std::cout << "rms_residual = " << format_double(k.rms_residual) << '\n'
                << "coverage = " << format_double(k.coverage) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
