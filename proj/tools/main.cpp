#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "wattgov/checkpoint.hpp"
#include "wattgov/config.hpp"
#include "wattgov/envsim.hpp"
#include "wattgov/errors.hpp"
#include "wattgov/ppo.hpp"
#include "wattgov/report.hpp"
#include "wattgov/telemetry.hpp"

namespace {

namespace fs = std::filesystem;
using namespace wattgov;

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    raise(Errc::SinkError, "cannot open '" + path.string() + "' for writing");
  }
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(Errc::SinkError, "cannot create directory '" + dir + "'");
}

config::RunConfig load_effective_config(const std::string& path,
                                        bool seed_given, std::uint64_t seed) {
  config::RunConfig cfg = config::load_run_config(path);
  config::apply_env_overrides(cfg);
  if (seed_given) cfg.train.seed = seed;
  cfg.validate();
  return cfg;
}

envsim::Policy checkpoint_policy(const ppo::ActorCritic& agent, double tau) {
  return [agent, tau](const feature::Observation& obs) {
    return envsim::decode_action(agent.action_mean(obs), tau);
  };
}

int cmd_ingest(const std::string& trace_path, double rate, bool resample_given,
               double resample_rate, const std::string& out_path) {
  telemetry::PowerTrace trace = telemetry::load_trace_csv(trace_path, rate);
  if (resample_given) trace = telemetry::resample(trace, resample_rate);
  if (!out_path.empty()) {
    std::ofstream out = open_out(out_path);
    telemetry::write_trace_csv(trace, out);
  }
  const double t0 = trace.start_time();
  const double t1 = trace.end_time();
  const double cpu_mwh =
      telemetry::integrate_energy_mwh(trace, t0, t1, telemetry::Channel::Cpu);
  const double gpu_mwh =
      telemetry::integrate_energy_mwh(trace, t0, t1, telemetry::Channel::Gpu);
  const double total_mwh = cpu_mwh + gpu_mwh;
  const double mean_w =
      trace.span() > 0.0 ? total_mwh * 3.6 / trace.span() : 0.0;
  std::printf(
      "samples=%zu duration_s=%.6g mean_w=%.6g cpu_mwh=%.6g gpu_mwh=%.6g "
      "total_mwh=%.6g irregular=%d\n",
      trace.size(), trace.span(), mean_w, cpu_mwh, gpu_mwh, total_mwh,
      trace.irregular ? 1 : 0);
  return 0;
}

int cmd_train(const std::string& config_path, bool seed_given,
              std::uint64_t seed, const std::string& out_dir) {
  config::RunConfig cfg = load_effective_config(config_path, seed_given, seed);
  ensure_dir(out_dir);
  {
    std::ofstream snap = open_out(fs::path(out_dir) / "config_snapshot.cfg");
    config::write_run_config(cfg, snap);
  }
  telemetry::PowerTrace workload = config::load_workload(cfg.workload);
  envsim::PowerEnv env(cfg.env, std::move(workload));
  ppo::Trainer trainer(cfg.train, std::move(env));
  const std::vector<ppo::EpochMetrics> history = trainer.train();
  {
    std::ofstream curves = open_out(fs::path(out_dir) / "curves.csv");
    report::export_curves(history, curves);
  }
  checkpoint::Checkpoint ckpt;
  ckpt.env_hash = config::env_block_hash(cfg);
  ckpt.agent = trainer.agent();
  ckpt.actor_opt = trainer.actor_opt();
  ckpt.log_std_opt = trainer.log_std_opt();
  ckpt.critic_opt = trainer.critic_opt();
  checkpoint::save_file(ckpt,
                        (fs::path(out_dir) / "checkpoint.txt").string());
  const ppo::EpochMetrics& last = history.back();
  std::printf("epochs=%zu final_mean_reward=%.6g final_critic_loss=%.6g\n",
              history.size(), last.mean_reward, last.critic_loss);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path,
                 const std::string& config_path, bool seed_given,
                 std::uint64_t seed, const std::string& baseline_name,
                 const std::string& out_dir) {
  config::RunConfig cfg = load_effective_config(config_path, seed_given, seed);
  checkpoint::Checkpoint ckpt = checkpoint::load_file(checkpoint_path);
  const std::uint64_t expected = config::env_block_hash(cfg);
  if (ckpt.env_hash != expected) {
    char want[32], got[32];
    std::snprintf(want, sizeof(want), "%016llx",
                  static_cast<unsigned long long>(expected));
    std::snprintf(got, sizeof(got), "%016llx",
                  static_cast<unsigned long long>(ckpt.env_hash));
    raise(Errc::ChecksumMismatch,
          std::string("checkpoint was trained against environment ") + got +
              ", config describes " + want);
  }
  envsim::BaselineKind baseline;
  if (baseline_name == "always_max") {
    baseline = envsim::BaselineKind::AlwaysMax;
  } else if (baseline_name == "always_keep") {
    baseline = envsim::BaselineKind::AlwaysKeep;
  } else {
    raise(Errc::ConfigInvalid,
          "--baseline must be always_max or always_keep, got '" +
              baseline_name + "'");
  }
  ensure_dir(out_dir);
  telemetry::PowerTrace workload = config::load_workload(cfg.workload);
  const report::CompareResult result = report::compare_run(
      cfg.env, workload, checkpoint_policy(ckpt.agent, cfg.env.tau), baseline,
      cfg.report_windows, cfg.train.seed);
  {
    std::ofstream out = open_out(fs::path(out_dir) / "energy_report.csv");
    report::write_energy_report_csv(result.report, out);
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "power_compare.csv");
    report::write_power_compare_csv(result, cfg.env.dt_s, out);
  }
  {
    std::ofstream out = open_out(fs::path(out_dir) / "violations.csv");
    out << "policy,violation_rate\n";
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.17g\ncontrolled,%.17g\n",
                  envsim::to_string(baseline),
                  result.baseline_violation_rate,
                  result.controlled_violation_rate);
    out << buf;
  }
  const std::size_t last = result.report.windows_s.size() - 1;
  std::printf(
      "windows=%zu improvement_at_%gs=%.3f%% baseline_violation=%.6g "
      "controlled_violation=%.6g\n",
      result.report.windows_s.size(), result.report.windows_s[last],
      result.report.improvement_pct[last], result.baseline_violation_rate,
      result.controlled_violation_rate);
  return 0;
}

int cmd_report(const std::string& baseline_path,
               const std::string& controlled_path,
               const std::vector<double>& windows, double rate,
               const std::string& out_dir) {
  const telemetry::PowerTrace baseline =
      telemetry::load_trace_csv(baseline_path, rate);
  const telemetry::PowerTrace controlled =
      telemetry::load_trace_csv(controlled_path, rate);
  const report::EnergyReport table =
      report::energy_table(baseline, controlled, windows);
  ensure_dir(out_dir);
  {
    std::ofstream out = open_out(fs::path(out_dir) / "energy_report.csv");
    report::write_energy_report_csv(table, out);
  }
  for (std::size_t i = 0; i < table.windows_s.size(); ++i) {
    std::printf("window_s=%g baseline_mwh=%.6g controlled_mwh=%.6g "
                "improvement_pct=%.3f\n",
                table.windows_s[i], table.baseline_mwh[i],
                table.controlled_mwh[i], table.improvement_pct[i]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power-governor training and evaluation toolkit"};
  app.require_subcommand(1);

  std::string trace_path, config_path, checkpoint_path, out;
  std::string baseline_path, controlled_path;
  std::string baseline_name = "always_max";
  std::uint64_t seed = 0;
  double rate = 2000.0;
  double resample_rate = 0.0;
  std::vector<double> windows{1.0, 10.0, 30.0, 60.0, 90.0};

  CLI::App* ingest = app.add_subcommand("ingest", "validate a telemetry CSV");
  ingest->add_option("trace", trace_path, "input trace CSV")->required();
  ingest->add_option("--rate", rate, "nominal sample rate, Hz");
  CLI::Option* resample_opt =
      ingest->add_option("--resample", resample_rate, "resample to rate, Hz");
  ingest->add_option("--out", out, "write normalized trace CSV here");

  CLI::App* train = app.add_subcommand("train", "run PPO training");
  train->add_option("--config", config_path, "run config file")->required();
  CLI::Option* train_seed = train->add_option("--seed", seed, "override seed");
  train->add_option("--out", out, "output directory")->required();

  CLI::App* evaluate =
      app.add_subcommand("evaluate", "compare a checkpoint to a baseline");
  evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  evaluate->add_option("--config", config_path, "run config file")->required();
  CLI::Option* eval_seed = evaluate->add_option("--seed", seed, "override seed");
  evaluate->add_option("--baseline", baseline_name,
                       "always_max or always_keep");
  evaluate->add_option("--out", out, "output directory")->required();

  CLI::App* report_cmd =
      app.add_subcommand("report", "energy table from two trace CSVs");
  report_cmd->add_option("--baseline", baseline_path, "baseline trace CSV")
      ->required();
  report_cmd->add_option("--controlled", controlled_path, "controlled trace CSV")
      ->required();
  report_cmd->add_option("--windows", windows, "cumulative windows, seconds");
  report_cmd->add_option("--rate", rate, "nominal sample rate, Hz");
  report_cmd->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
    if (ingest->parsed()) {
      return cmd_ingest(trace_path, rate, resample_opt->count() > 0,
                        resample_rate, out);
    }
    if (train->parsed()) {
      return cmd_train(config_path, train_seed->count() > 0, seed, out);
    }
    if (evaluate->parsed()) {
      return cmd_evaluate(checkpoint_path, config_path,
                          eval_seed->count() > 0, seed, baseline_name, out);
    }
    if (report_cmd->parsed()) {
      return cmd_report(baseline_path, controlled_path, windows, rate, out);
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const wattgov::Error& e) {
    std::cerr << e.what() << "\n";
    return e.exit_class();
  } catch (const std::exception& e) {
    std::cerr << "InternalError: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
