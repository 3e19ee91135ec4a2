// Acceptance gate: nine end-to-end checks, one PASS/FAIL line each, exit 0
// only when all pass. Slow checks (6, 7, 9) train real agents, so a full run
// takes several minutes.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "wattgov/config.hpp"
#include "wattgov/envsim.hpp"
#include "wattgov/nn.hpp"
#include "wattgov/ppo.hpp"
#include "wattgov/report.hpp"
#include "wattgov/telemetry.hpp"

namespace fs = std::filesystem;
using namespace wattgov;

namespace {

struct Check {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[256];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

telemetry::PowerSample rail_sample(double t, double watts) {
  telemetry::PowerSample s;
  s.t_s = t;
  s.cpu_v = 1.0;
  s.cpu_i = watts / 2.0;
  s.gpu_v = 1.0;
  s.gpu_i = watts / 2.0;
  return s;
}

// Piecewise-constant trace whose cumulative energy over [0, boundary[k]]
// equals cum_mwh[k] exactly: twin samples straddle each power change.
telemetry::PowerTrace staircase_from_cumulative(
    const std::vector<double>& boundaries_s,
    const std::vector<double>& cum_mwh) {
  std::vector<telemetry::PowerSample> samples;
  double prev_t = 0.0;
  double prev_e = 0.0;
  for (std::size_t k = 0; k < boundaries_s.size(); ++k) {
    const double watts =
        (cum_mwh[k] - prev_e) * 3.6 / (boundaries_s[k] - prev_t);
    samples.push_back(rail_sample(prev_t, watts));
    samples.push_back(rail_sample(std::nextafter(boundaries_s[k], prev_t),
                                  watts));
    prev_t = boundaries_s[k];
    prev_e = cum_mwh[k];
  }
  samples.push_back(rail_sample(prev_t, samples.back().cpu_i * 2.0));
  return telemetry::make_trace(std::move(samples), 1.0);
}

// 1: the five reference (baseline, controlled) cumulative-energy pairs must
// map onto the known improvement percentages through energy_table.
Check check_energy_table() {
  const std::vector<double> windows{1.0, 10.0, 30.0, 60.0, 90.0};
  const std::vector<double> base_mwh{2.325, 23.309, 70.682, 141.903, 214.417};
  const std::vector<double> ctrl_mwh{1.771, 17.803, 53.916, 108.153, 163.049};
  const std::vector<double> want_pct{23.828, 23.622, 23.720, 23.784, 23.957};

  const telemetry::PowerTrace base = staircase_from_cumulative(windows,
                                                               base_mwh);
  const telemetry::PowerTrace ctrl = staircase_from_cumulative(windows,
                                                               ctrl_mwh);
  const report::EnergyReport table = report::energy_table(base, ctrl, windows);

  double worst_pp = 0.0;
  double worst_mwh = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    worst_pp = std::max(worst_pp,
                        std::abs(table.improvement_pct[i] - want_pct[i]));
    worst_mwh = std::max(worst_mwh,
                         std::abs(table.baseline_mwh[i] - base_mwh[i]));
    worst_mwh = std::max(worst_mwh,
                         std::abs(table.controlled_mwh[i] - ctrl_mwh[i]));
  }
  return {worst_pp <= 0.001 && worst_mwh <= 1e-6,
          fmt("max error %.2e pp, energies to %.1e mWh", worst_pp, worst_mwh)};
}

// 2: trapezoid energy against the closed form, then additivity and
// channel-sum invariants on 1000 random traces.
Check check_energy_oracle() {
  const telemetry::PowerTrace flat = staircase_from_cumulative({1.0}, {2.325});
  const double got =
      telemetry::integrate_energy_mwh(flat, 0.0, 1.0, telemetry::Channel::Total);
  if (std::abs(got - 2.325) > 1e-6) {
    return {false, fmt("8.37 W over 1 s gave %.9f mWh", got)};
  }

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> gap(0.01, 0.2);
  std::uniform_real_distribution<double> volts(0.5, 3.0);
  std::uniform_real_distribution<double> amps(0.0, 3.0);
  double worst = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const int n = 2 + static_cast<int>(rng() % 30);
    std::vector<telemetry::PowerSample> samples;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
      telemetry::PowerSample s;
      s.t_s = t;
      s.cpu_v = volts(rng);
      s.cpu_i = amps(rng);
      s.gpu_v = volts(rng);
      s.gpu_i = amps(rng);
      samples.push_back(s);
      t += gap(rng);
    }
    const telemetry::PowerTrace trace =
        telemetry::make_trace(std::move(samples), 10.0);
    const double t0 = trace.start_time();
    const double t1 = trace.end_time();
    std::uniform_real_distribution<double> inside(t0, t1);
    const double tb = inside(rng);

    const auto total = [&](double a, double b) {
      return telemetry::integrate_energy_mwh(trace, a, b,
                                             telemetry::Channel::Total);
    };
    const double whole = total(t0, t1);
    const double split = total(t0, tb) + total(tb, t1);
    const double cpu =
        telemetry::integrate_energy_mwh(trace, t0, t1, telemetry::Channel::Cpu);
    const double gpu =
        telemetry::integrate_energy_mwh(trace, t0, t1, telemetry::Channel::Gpu);
    const double scale = std::max(1.0, std::abs(whole));
    worst = std::max(worst, std::abs(whole - split) / scale);
    worst = std::max(worst, std::abs(whole - (cpu + gpu)) / scale);
  }
  return {worst < 1e-9, fmt("worst invariant error %.2e", worst)};
}

double grads_rel_err(const nn::Grads& got, const nn::Grads& want) {
  double worst = 0.0;
  for (std::size_t l = 0; l < got.w.size(); ++l) {
    const double sw = std::max(1.0, want.w[l].cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (got.w[l] - want.w[l]).cwiseAbs().maxCoeff() / sw);
    const double sb = std::max(1.0, want.b[l].cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (got.b[l] - want.b[l]).cwiseAbs().maxCoeff() / sb);
  }
  return worst;
}

// 3: analytic backprop against central differences for both head shapes.
Check check_gradients() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int seed = 1; seed <= 10; ++seed) {
    for (int out_dim : {1, 2}) {
      nn::Mlp net(9, {64, 64}, out_dim);
      net.init_random(static_cast<std::uint64_t>(seed), 1.0, 0.01);
      Eigen::MatrixXd x(9, 1);
      Eigen::MatrixXd upstream(out_dim, 1);
      for (int i = 0; i < 9; ++i) x(i, 0) = normal(rng);
      for (int i = 0; i < out_dim; ++i) upstream(i, 0) = normal(rng);
      nn::ForwardCache cache;
      net.forward(x, cache);
      const nn::Grads analytic = net.backward(cache, upstream);
      const nn::Grads numeric = nn::finite_difference_grads(net, x, upstream,
                                                            1e-5);
      worst = std::max(worst, grads_rel_err(analytic, numeric));
    }
  }
  return {worst < 1e-4, fmt("max relative error %.2e over 20 nets", worst)};
}

// 4: the recursive return computation against O(T^2) direct summation.
Check check_returns() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rew(-2.0, 2.0);
  double worst = 0.0;
  int cases = 0;
  for (double gamma : {0.0, 0.5, 0.99, 1.0}) {
    for (int it = 0; it < 125; ++it) {
      const int len = 1 + static_cast<int>(rng() % 64);
      std::vector<double> rewards(len);
      for (double& r : rewards) r = rew(rng);
      const double bootstrap = (it % 2 == 0) ? 0.0 : rew(rng);
      const std::vector<double> got =
          ppo::discounted_returns(rewards, gamma, bootstrap);
      for (int t = 0; t < len; ++t) {
        double direct = 0.0;
        double g = 1.0;
        for (int k = t; k < len; ++k) {
          direct += g * rewards[k];
          g *= gamma;
        }
        direct += g * bootstrap;
        worst = std::max(worst, std::abs(got[t] - direct));
      }
      ++cases;
    }
  }
  return {worst <= 1e-9 && cases == 500,
          fmt("max deviation %.2e over %d cases", worst, cases)};
}

// 5: per-element properties of the clipped surrogate on random triples.
Check check_surrogate() {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> log_ratio(-1.5, 1.5);
  std::uniform_real_distribution<double> adv(-3.0, 3.0);
  std::uniform_real_distribution<double> eps_dist(0.05, 0.4);

  const auto surrogate = [](double r, double a, double eps) {
    const std::vector<double> ratio{r}, advantage{a};
    return -ppo::clipped_actor_loss(ratio, advantage, eps);
  };

  int inactive = 0, saturated = 0, violations = 0;
  for (int it = 0; it < 10000; ++it) {
    const double r = std::exp(log_ratio(rng));
    const double a = adv(rng);
    const double eps = eps_dist(rng);
    const double s = surrogate(r, a, eps);
    const double clipped = std::clamp(r, 1.0 - eps, 1.0 + eps);

    // pessimism: never above either branch
    if (s > r * a || s > clipped * a) ++violations;
    // inactivity: inside the trust band the surrogate IS ratio * advantage
    if (std::abs(r - 1.0) <= eps) {
      ++inactive;
      if (s != r * a) ++violations;
    }
    // saturation: in the clipped-and-chosen branch the ratio has no effect
    if (r > 1.0 + eps && a > 0.0) {
      ++saturated;
      if (surrogate(r * 1.01, a, eps) != s) ++violations;
    }
    if (r < 1.0 - eps && a < 0.0) {
      ++saturated;
      if (surrogate(r * 0.99, a, eps) != s) ++violations;
    }
  }
  return {violations == 0 && inactive > 500 && saturated > 500,
          fmt("%d violations (%d inactive, %d saturated draws)", violations,
              inactive, saturated)};
}

config::RunConfig load_bundled(const char* name) {
  config::RunConfig cfg =
      config::load_run_config(std::string(WATTGOV_CONFIG_DIR) + "/" + name);
  cfg.validate();
  return cfg;
}

std::vector<ppo::EpochMetrics> train_once(const config::RunConfig& cfg,
                                          const telemetry::PowerTrace& load,
                                          std::uint64_t seed, int epochs) {
  ppo::TrainConfig tc = cfg.train;
  tc.seed = seed;
  tc.epochs = epochs;
  ppo::Trainer trainer(tc, envsim::PowerEnv(cfg.env, load));
  return trainer.train();
}

// 6: the small constant-load task must reach 95% of the exhaustive optimum
// (final-10-epoch mean) on at least 4 of 5 seeds.
Check check_toy_optimality() {
  const config::RunConfig cfg = load_bundled("tiny_mdp.cfg");
  const telemetry::PowerTrace load = config::load_workload(cfg.workload);
  const envsim::OracleResult oracle = envsim::exhaustive_oracle(cfg.env, load);
  const double bar = oracle.mean_reward - 0.05 * std::abs(oracle.mean_reward);

  int passed = 0;
  double worst = 0.0;
  bool first = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<ppo::EpochMetrics> hist =
        train_once(cfg, load, seed, cfg.train.epochs);
    double tail = 0.0;
    for (std::size_t i = hist.size() - 10; i < hist.size(); ++i) {
      tail += hist[i].mean_reward;
    }
    tail /= 10.0;
    if (tail >= bar) ++passed;
    if (first || tail < worst) worst = tail;
    first = false;
  }
  return {passed >= 4,
          fmt("%d/5 seeds at bar %.4f (optimum %.4f, worst %.4f)", passed, bar,
              oracle.mean_reward, worst)};
}

// 7: on the duty-cycled workload the trained controller must save >= 15%
// energy against always_max while violating backlog on < 1% of steps.
Check check_energy_saving() {
  const config::RunConfig cfg = load_bundled("duty_cycle.cfg");
  const telemetry::PowerTrace load = config::load_workload(cfg.workload);

  int passed = 0;
  double worst_saving = 0.0, worst_violation = 0.0;
  bool first = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ppo::TrainConfig tc = cfg.train;
    tc.seed = seed;
    ppo::Trainer seeded(tc, envsim::PowerEnv(cfg.env, load));
    seeded.train();
    const report::CompareResult result = report::compare_run(
        cfg.env, load, seeded.deterministic_policy(),
        envsim::BaselineKind::AlwaysMax, cfg.report_windows, seed);
    const double saving = result.report.improvement_pct.back();
    const double violation = result.controlled_violation_rate;
    if (saving >= 15.0 && violation < 0.01) ++passed;
    if (first || saving < worst_saving) worst_saving = saving;
    if (first || violation > worst_violation) worst_violation = violation;
    first = false;
  }
  return {passed >= 4,
          fmt("%d/5 seeds (worst saving %.1f%%, worst violation %.4f)", passed,
              worst_saving, worst_violation)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(WATTGOV_BIN) + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// 8: two full CLI runs with the same config and seed must leave
// byte-identical curves.csv and energy_report.csv behind.
Check check_determinism() {
  char tmpl[] = "/tmp/wattgov_accept_XXXXXX";
  const char* root = mkdtemp(tmpl);
  if (root == nullptr) return {false, "mkdtemp failed"};
  const std::string dir(root);
  const std::string cfg = std::string(WATTGOV_CONFIG_DIR) + "/tiny_mdp.cfg";

  setenv("WATTGOV_Reuse_Times", "5", 1);
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const std::string out = dir + "/train_" + run;
    ok = ok && run_cli("train --config " + cfg + " --out " + out) == 0;
    ok = ok &&
         run_cli("evaluate --checkpoint " + out + "/checkpoint.txt" +
                 " --config " + cfg + " --out " + dir + "/eval_" + run) == 0;
  }
  unsetenv("WATTGOV_Reuse_Times");
  if (!ok) return {false, "a CLI run failed"};

  const std::string curves_a = slurp(dir + "/train_a/curves.csv");
  const std::string report_a = slurp(dir + "/eval_a/energy_report.csv");
  const bool curves_same = !curves_a.empty() &&
                           curves_a == slurp(dir + "/train_b/curves.csv");
  const bool report_same = !report_a.empty() &&
                           report_a == slurp(dir + "/eval_b/energy_report.csv");
  return {curves_same && report_same,
          fmt("curves.csv %s, energy_report.csv %s",
              curves_same ? "identical" : "varies",
              report_same ? "identical" : "varies")};
}

// 9: a 200-epoch run on the toy task must show the learning shape: the
// 25-epoch moving average of reward rises and of critic loss falls, and the
// mean log-probability never degenerates.
Check check_training_trends() {
  const config::RunConfig cfg = load_bundled("tiny_mdp.cfg");
  const telemetry::PowerTrace load = config::load_workload(cfg.workload);
  const std::vector<ppo::EpochMetrics> hist = train_once(cfg, load, 1, 200);
  if (hist.size() != 200) return {false, "expected 200 epochs"};

  const auto window_mean = [&](std::size_t end_epoch, auto field) {
    double sum = 0.0;
    for (std::size_t i = end_epoch - 25; i < end_epoch; ++i) {
      sum += field(hist[i]);
    }
    return sum / 25.0;
  };
  const auto reward = [](const ppo::EpochMetrics& m) { return m.mean_reward; };
  const auto crit = [](const ppo::EpochMetrics& m) { return m.critic_loss; };
  const double r25 = window_mean(25, reward), r200 = window_mean(200, reward);
  const double c25 = window_mean(25, crit), c200 = window_mean(200, crit);

  bool log_prob_ok = true;
  for (const ppo::EpochMetrics& m : hist) {
    if (!std::isfinite(m.mean_log_prob)) log_prob_ok = false;
  }
  return {r200 > r25 && c200 < c25 && log_prob_ok,
          fmt("reward %.3f -> %.3f, critic loss %.3f -> %.3f", r25, r200, c25,
              c200)};
}

}  // namespace

int main() {
  struct Item {
    const char* label;
    std::function<Check()> run;
    double limit_s;  // 0: no runtime bound
  };
  const std::vector<Item> items{
      {"cumulative energy table reproduces the reference improvements",
       check_energy_table, 1.0},
      {"trapezoid energy matches the W*s/3.6 closed form and invariants",
       check_energy_oracle, 10.0},
      {"analytic gradients agree with central finite differences",
       check_gradients, 30.0},
      {"recursive discounted returns equal direct summation",
       check_returns, 5.0},
      {"clipped surrogate is inactive, saturated, pessimistic as required",
       check_surrogate, 5.0},
      {"toy control task reaches 95% of the exhaustive-search optimum",
       check_toy_optimality, 300.0},
      {"duty-cycle controller saves >=15% energy with <1% violations",
       check_energy_saving, 600.0},
      {"identical config and seed yield byte-identical artifacts",
       check_determinism, 0.0},
      {"long run improves reward and reduces critic loss throughout",
       check_training_trends, 0.0},
  };

  int failures = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Check result;
    try {
      result = items[i].run();
    } catch (const std::exception& e) {
      result = {false, std::string("raised: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    if (items[i].limit_s > 0.0 && secs > items[i].limit_s) {
      result.pass = false;
      result.detail += fmt(" [over %.0f s budget]", items[i].limit_s);
    }
    if (!result.pass) ++failures;
    std::printf("[%s] %zu. %s (%s; %.1f s)\n", result.pass ? "PASS" : "FAIL",
                i + 1, items[i].label, result.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("acceptance: %zu/%zu passed\n", items.size() - failures,
              items.size());
  return failures == 0 ? 0 : 1;
}
