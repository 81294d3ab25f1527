#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "monest/analysis.hpp"
#include "monest/plant_sine.hpp"

namespace monest {

using Json = nlohmann::ordered_json;

std::vector<std::string> scenario_ids();

// Complete config with every key at its default. Keys absent here are unknown.
Json default_config(const std::string& scenario);

// Validated config: the user's keys merged over the defaults.
struct ScenarioConfig {
  std::string scenario;
  Json effective;

  const Json& at(const std::string& dotted) const;
  template <class T>
  T get(const std::string& dotted) const {
    return at(dotted).template get<T>();
  }
};

// Throws ConfigError naming every offending key path.
ScenarioConfig parse_config(const Json& user);
ScenarioConfig load_config(const std::string& path);

// Sets a dotted path ("plant.x3_star", "estimator.Gamma.0") on a user config.
void set_path(Json& config, const std::string& dotted, const Json& value);

struct CheckResult {
  std::string name;
  bool pass = false;
  double witness = 0.0;
  std::string note;
};

struct RunReport {
  Json scenario;
  Json metrics = Json::object();
  std::vector<CheckResult> checks;
  std::vector<std::string> files;
  std::size_t samples = 0;

  bool all_pass() const;
  Json to_json() const;
};

// Simulates, writes <dir>/<prefix>.csv, <prefix>.json and scenario extras unless
// output.write is false.
RunReport run_scenario(const ScenarioConfig& config);

struct SweepResult {
  std::string axis;
  std::vector<double> values;
  std::vector<RunReport> reports;
  std::string table_path;
};

// One run per value, parallel across MONEST_THREADS workers; merged CSV table.
SweepResult run_sweep(const Json& user, const std::string& axis, const std::vector<double>& values);

// Diagnostics for the last uninterrupted identification interval of a sine run.
struct SineDiagnostics {
  std::size_t begin = 0;  // sample index where the interval starts
  BoundReport bounds;
  EnvelopeCheck envelope;
  LyapunovReport lyapunov;
  GramianSeries gramian;
  RateFit rate;
  double rate_floor = 0.0;
  double max_toggle_jump = 0.0;
  double final_err = 0.0;
  double max_abs_state = 0.0;
};

SineDiagnostics analyze_sine(const SineScenario& scenario, const SineRun& run, double pe_window);

// Sine EstimatorConfig for a ball's parametrization and error functional.
EstimatorConfig sine_estimator_config(const SineScenario& scenario, int ball = 0);

}  // namespace monest
