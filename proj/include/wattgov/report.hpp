#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "wattgov/envsim.hpp"
#include "wattgov/ppo.hpp"
#include "wattgov/telemetry.hpp"

namespace wattgov::report {

// Cumulative-from-start energy comparison: each window is [0, w] seconds,
// so longer windows contain shorter ones.
struct EnergyReport {
  std::vector<double> windows_s;
  std::vector<double> baseline_mwh;
  std::vector<double> controlled_mwh;
  std::vector<double> improvement_pct;  // (base - ctrl) / base * 100
};

inline const std::vector<double> kDefaultWindows{1.0, 10.0, 30.0, 60.0, 90.0};

// Raises TraceTooShort when either trace does not cover max(windows).
EnergyReport energy_table(const telemetry::PowerTrace& baseline,
                          const telemetry::PowerTrace& controlled,
                          std::span<const double> windows);

void write_energy_report_csv(const EnergyReport& report, std::ostream& out);

// One row per epoch: epoch,mean_reward,critic_loss,actor_loss,
// mean_log_prob,approx_kl,policy_iters. Raises SinkError / EmptySequence.
void export_curves(std::span<const ppo::EpochMetrics> history,
                   std::ostream& out);

struct CompareResult {
  EnergyReport report;
  double baseline_violation_rate = 0.0;
  double controlled_violation_rate = 0.0;
  envsim::EpisodeResult baseline_run;
  envsim::EpisodeResult controlled_run;
};

// Runs controlled policy and baseline over the identical workload and seed,
// then compares their emitted power traces.
CompareResult compare_run(const envsim::EnvConfig& cfg,
                          const telemetry::PowerTrace& workload,
                          const envsim::Policy& controlled,
                          envsim::BaselineKind baseline,
                          std::span<const double> windows,
                          std::uint64_t seed = 0);

// Per-step power of both runs: t_s,baseline_w,controlled_w
void write_power_compare_csv(const CompareResult& result, double dt_s,
                             std::ostream& out);

}  // namespace wattgov::report
