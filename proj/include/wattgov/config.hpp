#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "wattgov/envsim.hpp"
#include "wattgov/ppo.hpp"
#include "wattgov/telemetry.hpp"

namespace wattgov::config {

// The workload is either a telemetry CSV or a synthetic generator spec like
// "square:low=1.5,high=9,period=4,duty=0.5,duration=96,rate=200"
// (kinds: constant, square, ramp). Exactly one source must be set.
struct WorkloadSpec {
  std::string trace_path;
  std::string synthetic;
  double trace_rate_hz = 2000.0;
};

struct RunConfig {
  ppo::TrainConfig train;
  envsim::EnvConfig env;
  WorkloadSpec workload;
  std::vector<double> report_windows{1.0, 10.0, 30.0, 60.0, 90.0};

  void validate() const;
};

// Flat `Key = value` lines, '#' comments. Unknown keys are rejected with
// the key name; missing keys keep their defaults.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

// Environment variables WATTGOV_<Key> override any config key.
void apply_env_overrides(RunConfig& cfg);

// Canonical full serialization: every key, fixed order, %.17g numbers.
// Re-parsing the output reproduces the config exactly.
void write_run_config(const RunConfig& cfg, std::ostream& out);

// FNV-1a over the canonical environment/feature/workload block; ties a
// checkpoint to the setting it was trained in.
std::uint64_t env_block_hash(const RunConfig& cfg);

telemetry::PowerTrace load_workload(const WorkloadSpec& spec);

}  // namespace wattgov::config
