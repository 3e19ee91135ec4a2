#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "wattgov/feature.hpp"
#include "wattgov/telemetry.hpp"

namespace wattgov::envsim {

// A controllable device: discrete power levels with per-level draw and
// service capacity. power_w strictly increases with level, capacity never
// decreases, so higher levels always trade energy for throughput.
struct DeviceModel {
  std::vector<double> power_w;   // watts at each level
  std::vector<double> capacity;  // work-units/second at each level
  double idle_w = 0.0;           // added at every level

  int levels() const { return static_cast<int>(power_w.size()); }
  void validate(const std::string& name) const;  // raises ConfigInvalid
};

DeviceModel default_cpu_model();
DeviceModel default_gpu_model();

enum class Move { Up, Keep, Down };

const char* to_string(Move m);

// 3x3 action grid, row-major over (cpu_move, gpu_move) with move order
// Up, Keep, Down: 0=(Up,Up), 1=(Up,Keep), 2=(Up,Down), 3=(Keep,Up),
// 4=(Keep,Keep), 5=(Keep,Down), 6=(Down,Up), 7=(Down,Keep), 8=(Down,Down).
struct JointAction {
  int index = 4;
  Move cpu_move = Move::Keep;
  Move gpu_move = Move::Keep;
  Eigen::Vector2d raw{0.0, 0.0};  // pre-threshold continuous action
  double log_prob = 0.0;
};

int action_index(Move cpu, Move gpu);
std::pair<Move, Move> moves_of_index(int index);

// Per-component threshold: x > tau -> Up, x < -tau -> Down, else Keep.
JointAction decode_action(const Eigen::Vector2d& raw, double tau = 0.5);

struct StepInfo {
  double power_w = 0.0;
  double energy_mwh_step = 0.0;
  double backlog = 0.0;
  double served = 0.0;
  bool violated = false;  // backlog > 0 after the step
};

struct StepOutcome {
  feature::Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EnvConfig {
  DeviceModel cpu = default_cpu_model();
  DeviceModel gpu = default_gpu_model();
  double dt_s = 0.1;          // decision interval
  double alpha = 1.0;         // power weight in the reward
  double beta = 4.0;          // backlog weight in the reward
  double tau = 0.5;           // decode threshold
  int horizon_steps = 0;      // 0: run to the end of the trace
  int initial_cpu_level = 0;
  int initial_gpu_level = 0;
  double watts_per_work_unit = 1.0;  // converts trace energy to demand
  feature::FeatureConfig feature;

  void validate() const;  // raises ConfigInvalid
};

// r = -alpha * power/p_max - beta * backlog/backlog_ref
double reward(double power_w, double backlog, const EnvConfig& cfg,
              double backlog_ref);

// Workload-trace-driven simulation. Demand for step k is the trace energy
// over [k*dt, (k+1)*dt] divided by watts_per_work_unit; it is precomputed,
// so stepping is O(1) and the environment is fully deterministic.
class PowerEnv {
 public:
  PowerEnv(EnvConfig cfg, telemetry::PowerTrace workload);

  feature::Observation reset(std::uint64_t seed);
  StepOutcome step(const JointAction& action);  // raises SteppedAfterDone

  bool done() const { return done_; }
  int episode_steps() const { return episode_steps_; }
  int steps_taken() const { return steps_taken_; }
  int cpu_level() const { return cpu_level_; }
  int gpu_level() const { return gpu_level_; }
  double backlog() const { return backlog_; }
  double backlog_ref() const { return backlog_ref_; }
  double max_step_demand() const { return max_step_demand_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<double>& step_demands() const { return demand_; }

  // Staircase trace of the powers drawn since the last reset; each step's
  // power is held constant over its interval, so trapezoidal integration
  // of this trace reproduces the summed per-step energies.
  telemetry::PowerTrace emitted_power_trace() const;

 private:
  feature::Observation observe() const;

  EnvConfig cfg_;
  telemetry::PowerTrace workload_;
  std::vector<double> demand_;                     // per step, work-units
  std::vector<telemetry::WindowStats> cpu_stats_;  // per step window
  std::vector<telemetry::WindowStats> gpu_stats_;
  double backlog_ref_ = 1.0;
  double max_step_demand_ = 0.0;
  int episode_steps_ = 0;

  int cpu_level_ = 0;
  int gpu_level_ = 0;
  double backlog_ = 0.0;
  int steps_taken_ = 0;
  bool done_ = true;  // must reset before stepping
  std::vector<double> emitted_w_;
};

using Policy = std::function<JointAction(const feature::Observation&)>;

enum class BaselineKind { AlwaysMax, AlwaysKeep };

const char* to_string(BaselineKind k);

Policy baseline_policy(BaselineKind kind);

// Rolls a policy through one full episode from reset(seed).
struct EpisodeResult {
  double mean_reward = 0.0;
  double total_energy_mwh = 0.0;
  int steps = 0;
  int violated_steps = 0;
  std::vector<double> step_power_w;
  telemetry::PowerTrace power_trace;
};

EpisodeResult run_episode(PowerEnv& env, const Policy& policy,
                          std::uint64_t seed);

// Best stationary deterministic policy by brute force: every mapping from
// a device's own level to a Move, both devices jointly, each evaluated by
// a full rollout. Tiny configs only. Raises ConfigTooLarge when levels
// exceed 3 per device, joint states exceed 81, or the episode exceeds 50
// steps.
struct OracleResult {
  std::vector<Move> cpu_map;  // per cpu level
  std::vector<Move> gpu_map;  // per gpu level
  double mean_reward = 0.0;
};

OracleResult exhaustive_oracle(const EnvConfig& cfg,
                               const telemetry::PowerTrace& workload);

// Synthetic workload generators for tests and bundled configs. Power is
// split evenly between the two rails at a fixed 5 V.
telemetry::PowerTrace synth_constant(double watts, double duration_s,
                                     double rate_hz);
telemetry::PowerTrace synth_square(double low_w, double high_w,
                                   double period_s, double duty,
                                   double duration_s, double rate_hz);
telemetry::PowerTrace synth_ramp(double start_w, double end_w,
                                 double duration_s, double rate_hz);

}  // namespace wattgov::envsim
