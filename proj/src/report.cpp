#include "wattgov/report.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <string>

#include "wattgov/errors.hpp"

namespace wattgov::report {

namespace {

void require_covers(const telemetry::PowerTrace& trace, double needed,
                    const char* which) {
  if (trace.span() + 1e-12 < needed) {
    raise(Errc::TraceTooShort,
          std::string(which) + " trace spans " + std::to_string(trace.span()) +
              " s; windows need " + std::to_string(needed) + " s");
  }
}

}  // namespace

EnergyReport energy_table(const telemetry::PowerTrace& baseline,
                          const telemetry::PowerTrace& controlled,
                          std::span<const double> windows) {
  if (windows.empty()) raise(Errc::EmptySequence, "no report windows");
  const double longest = *std::max_element(windows.begin(), windows.end());
  require_covers(baseline, longest, "baseline");
  require_covers(controlled, longest, "controlled");

  EnergyReport report;
  for (double w : windows) {
    const double t0b = baseline.start_time();
    const double t0c = controlled.start_time();
    const double base = telemetry::integrate_energy_mwh(
        baseline, t0b, std::min(t0b + w, baseline.end_time()),
        telemetry::Channel::Total);
    const double ctrl = telemetry::integrate_energy_mwh(
        controlled, t0c, std::min(t0c + w, controlled.end_time()),
        telemetry::Channel::Total);
    report.windows_s.push_back(w);
    report.baseline_mwh.push_back(base);
    report.controlled_mwh.push_back(ctrl);
    report.improvement_pct.push_back(base != 0.0
                                         ? (base - ctrl) / base * 100.0
                                         : 0.0);
  }
  return report;
}

void write_energy_report_csv(const EnergyReport& report, std::ostream& out) {
  out << "window_s,baseline_mwh,controlled_mwh,improvement_pct\n";
  char buf[160];
  for (std::size_t i = 0; i < report.windows_s.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n",
                  report.windows_s[i], report.baseline_mwh[i],
                  report.controlled_mwh[i], report.improvement_pct[i]);
    out << buf;
  }
  if (!out) raise(Errc::SinkError, "failed writing energy report");
}

void export_curves(std::span<const ppo::EpochMetrics> history,
                   std::ostream& out) {
  if (history.empty()) raise(Errc::EmptySequence, "empty training history");
  out << "epoch,mean_reward,critic_loss,actor_loss,mean_log_prob,approx_kl,"
         "policy_iters\n";
  char buf[256];
  for (const auto& m : history) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n",
                  m.epoch, m.mean_reward, m.critic_loss, m.actor_loss,
                  m.mean_log_prob, m.approx_kl, m.policy_iters_run);
    out << buf;
  }
  if (!out) raise(Errc::SinkError, "failed writing curves");
}

CompareResult compare_run(const envsim::EnvConfig& cfg,
                          const telemetry::PowerTrace& workload,
                          const envsim::Policy& controlled,
                          envsim::BaselineKind baseline,
                          std::span<const double> windows,
                          std::uint64_t seed) {
  envsim::PowerEnv env(cfg, workload);
  CompareResult result;
  result.baseline_run =
      envsim::run_episode(env, envsim::baseline_policy(baseline), seed);
  result.controlled_run = envsim::run_episode(env, controlled, seed);
  result.baseline_violation_rate =
      static_cast<double>(result.baseline_run.violated_steps) /
      static_cast<double>(result.baseline_run.steps);
  result.controlled_violation_rate =
      static_cast<double>(result.controlled_run.violated_steps) /
      static_cast<double>(result.controlled_run.steps);
  result.report = energy_table(result.baseline_run.power_trace,
                               result.controlled_run.power_trace, windows);
  return result;
}

void write_power_compare_csv(const CompareResult& result, double dt_s,
                             std::ostream& out) {
  out << "t_s,baseline_w,controlled_w\n";
  const std::size_t steps =
      std::min(result.baseline_run.step_power_w.size(),
               result.controlled_run.step_power_w.size());
  char buf[160];
  for (std::size_t k = 0; k < steps; ++k) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n",
                  static_cast<double>(k) * dt_s,
                  result.baseline_run.step_power_w[k],
                  result.controlled_run.step_power_w[k]);
    out << buf;
  }
  if (!out) raise(Errc::SinkError, "failed writing power comparison");
}

}  // namespace wattgov::report
