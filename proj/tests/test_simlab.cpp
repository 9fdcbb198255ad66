#include <doctest.h>

#include "grasplab/simulation.hpp"
#include "test_support.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

using namespace grasplab;

namespace {

std::string log_text(const MetricsLog& log) {
  std::ostringstream os;
  write_log_csv(os, log);
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("grasplab_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// std::stod rejects subnormals with ERANGE; from_chars parses them.
double parse(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  REQUIRE(res.ec == std::errc());
  REQUIRE(res.ptr == s.data() + s.size());
  return v;
}

}  // namespace

TEST_CASE("metrics schema for two agents with two arms") {
  const auto cols = MetricsLog::schema(2, 2);
  CHECK(cols.size() == 9 + 4 + 2);
  CHECK(cols.front() == "t");
  CHECK(cols[9] == "lam_1_1");
  CHECK(cols[12] == "lam_2_2");
  CHECK(cols.back() == "phi");
  MetricsLog log;
  log.columns = cols;
  CHECK(log.column("dW") == 6);
  CHECK(log.column("nope") == -1);
  CHECK_THROWS_AS(log.series("nope"), std::out_of_range);
}

TEST_CASE("shortest round-trip formatting") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::uint64_t> bits;
  int checked = 0;
  while (checked < 20000) {
    const std::uint64_t b = bits(rng);
    double v;
    std::memcpy(&v, &b, sizeof v);
    if (!std::isfinite(v)) continue;
    const std::string s = format_double(v);
    CHECK(same_bits(parse(s), v));
    ++checked;
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(same_bits(parse(format_double(-0.0)), -0.0));
  CHECK(same_bits(parse(format_double(std::numeric_limits<double>::denorm_min())),
                  std::numeric_limits<double>::denorm_min()));
}

TEST_CASE("log CSV round trip is bit exact") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd(0.0, 1.0);
  MetricsLog log;
  log.columns = MetricsLog::schema(2, 2);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> row;
    for (std::size_t c = 0; c < log.columns.size(); ++c) row.push_back(nd(rng) * std::pow(10.0, nd(rng) * 5));
    log.rows.push_back(row);
  }
  log.rows[3][2] = std::numeric_limits<double>::denorm_min();
  log.rows[4][5] = -std::numeric_limits<double>::max();
  const std::string text = log_text(log);
  CHECK(text.find('\r') == std::string::npos);
  std::istringstream is(text);
  const MetricsLog back = read_log_csv(is);
  REQUIRE(back.columns == log.columns);
  REQUIRE(back.rows.size() == log.rows.size());
  bool exact = true;
  for (std::size_t i = 0; i < log.rows.size(); ++i) {
    for (std::size_t c = 0; c < log.columns.size(); ++c) exact = exact && same_bits(back.rows[i][c], log.rows[i][c]);
  }
  CHECK(exact);
  CHECK(log_text(back) == text);

  const auto dir = scratch("csv");
  write_log_file(dir / "nested" / "m.csv", log);
  CHECK(log_text(read_log_file(dir / "nested" / "m.csv")) == text);
  CHECK_THROWS_AS(read_log_file(dir / "missing.csv"), std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("tail RMS") {
  MetricsLog log;
  log.columns = {"t", "x"};
  for (int i = 0; i <= 10; ++i) log.rows.push_back({0.1 * i, static_cast<double>(i)});
  // rows t >= 0.5: x = 5..10
  const double expect = std::sqrt((25 + 36 + 49 + 64 + 81 + 100) / 6.0);
  CHECK(tail_rms(log, "x", 0.5) == doctest::Approx(expect).epsilon(1e-15));
  CHECK_THROWS(tail_rms(log, "y", 0.0));
}

TEST_CASE("configuration parsing is strict") {
  const ScenarioConfig d = ScenarioConfig::defaults();
  CHECK_NOTHROW(d.validate());
  const ScenarioConfig same = ScenarioConfig::from_json_text(d.to_json_text());
  CHECK(same.to_json_text() == d.to_json_text());
  CHECK(ScenarioConfig::from_json_text("{}").to_json_text() == d.to_json_text());

  const ScenarioConfig o = ScenarioConfig::from_json_text(
      R"({"seed": 7, "integrator": {"dt": 0.002}, "gp": {"update_times": [1.0, 3.0]}})");
  CHECK(o.seed == 7);
  CHECK(o.integrator.dt == 0.002);
  CHECK(o.gp.schedule.update_times == std::vector<double>{1.0, 3.0});
  CHECK(o.integrator.horizon == d.integrator.horizon);

  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"sed": 7})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"integrator": {"dtt": 1}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"integrator": {"dt": -1}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"integrator": {"dt": "fast"}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"gp": {"confidence": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"gp": {"update_times": [3.0, 1.0]}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"disturbance": {"preset": "gusty"}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text(R"({"allocation": {"leaders": [0, 1, 9]}})"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::from_json_text("{ not json"), ConfigError);
  CHECK_THROWS_AS(ScenarioConfig::load("/nonexistent/grasplab.json"), ConfigError);
}

TEST_CASE("shipped default configuration matches the built-in defaults") {
  const ScenarioConfig shipped = ScenarioConfig::load(GRASPLAB_SOURCE_DIR "/configs/default.json");
  CHECK(shipped.to_json_text() == ScenarioConfig::defaults().to_json_text());
}

TEST_CASE("experiment cases and eta profiles") {
  CHECK(ExperimentCase::parse("C1").name() == "C1");
  CHECK_FALSE(ExperimentCase::parse("C1").payload_gp);
  CHECK(ExperimentCase::parse("C2").payload_gp);
  CHECK_FALSE(ExperimentCase::parse("C2").agent_gp);
  CHECK(ExperimentCase::parse("C3").agent_gp);
  CHECK_THROWS_AS(ExperimentCase::parse("C4"), ConfigError);

  EtaProfile e;
  CHECK(e.at(1.0, 6).norm() == 0.0);
  e.kind = EtaProfile::Kind::Sine;
  e.amplitude = 2.0;
  e.frequency = 0.25;
  e.direction = VecX::Ones(6);
  const VecX v = e.at(1.0, 6);
  CHECK(v.norm() == doctest::Approx(2.0 * std::sin(0.5 * std::numbers::pi)).epsilon(1e-14));
  CHECK(v(0) == doctest::Approx(v(5)));
  e.kind = EtaProfile::Kind::Constant;
  e.direction = VecX();
  CHECK((e.at(3.0, 4) - 2.0 * VecX::Unit(4, 0)).norm() == 0.0);
}

TEST_CASE("interface samples survive the log round trip") {
  std::vector<InterfaceSample> in;
  for (int i = 0; i < 20; ++i) {
    InterfaceSample s;
    s.t = 0.1 * i;
    s.t_k = i < 10 ? 0.0 : 1.0;
    s.delta_w = 0.3 + 0.01 * i;
    s.e_lambda_k = 1.0 / (1 + i);
    s.rho = {0.2 * i, 0.1};
    in.push_back(s);
  }
  const MetricsLog log = interface_log(in, 2);
  std::istringstream is(log_text(log));
  const std::vector<InterfaceSample> out = interface_samples_from_log(read_log_csv(is));
  REQUIRE(out.size() == in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    CHECK(out[i].t == in[i].t);
    CHECK(out[i].t_k == in[i].t_k);
    CHECK(out[i].delta_w == in[i].delta_w);
    CHECK(out[i].e_lambda_k == in[i].e_lambda_k);
    CHECK(out[i].rho == in[i].rho);
  }
}

TEST_CASE("validation suite passes on the defaults") {
  for (const Check& c : validate_suite(ScenarioConfig::defaults())) {
    INFO(c.name << " " << c.detail);
    CHECK(c.pass);
  }
}

TEST_CASE("short learning run is deterministic and well formed") {
  ScenarioConfig cfg = test::short_config(2.5);
  cfg.gp.schedule.update_times = {2.0};
  cfg.gp.schedule.fit.restarts = 1;
  const ExperimentCase c3 = ExperimentCase::make(CaseId::C3);
  const RunResult a = run_case(cfg, c3);
  const RunResult b = run_case(cfg, c3);

  CHECK(log_text(a.log) == log_text(b.log));
  CHECK(a.log.columns == MetricsLog::schema(2, 2));
  // one row per log period on [0, horizon)
  CHECK(a.log.rows.size() == 250);
  CHECK(a.log.rows.back()[0] == doctest::Approx(2.49));
  CHECK(a.summary.max_phi <= 1e-6);
  CHECK(a.summary.max_phi_dot <= 1e-4);
  CHECK(a.summary.payload_gp.samples > 0);
  CHECK(a.summary.agent_gp.size() == 2);
  CHECK(a.payload_data.frozen);
  CHECK(a.payload_data.freeze_time == 2.0);

  // another seed changes the noisy labels and therefore the log
  ScenarioConfig other = cfg;
  other.seed = cfg.seed + 1;
  CHECK(log_text(run_case(other, c3).log) != log_text(a.log));

  const auto dir = scratch("run");
  write_run(dir, a);
  for (const char* f : {"metrics.csv", "interface.csv", "summary.txt"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(log_text(read_log_file(dir / "metrics.csv")) == log_text(a.log));
  std::filesystem::remove_all(dir);
}

TEST_CASE("solver failures carry the failure time") {
  ScenarioConfig cfg = test::short_config(1.0);
  cfg.agent_gains.k_attitude = 1e6;
  cfg.agent_gains.k_rate = 1e4;
  try {
    run_case(cfg, ExperimentCase::make(CaseId::C1));
    FAIL("expected a solver failure");
  } catch (const SolverError& e) {
    CHECK(std::string(e.what()).find("t = ") != std::string::npos);
  }
}
