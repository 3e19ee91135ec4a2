#include "wattgov/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wattgov/errors.hpp"

namespace wattgov::envsim {

void DeviceModel::validate(const std::string& name) const {
  if (power_w.empty()) {
    raise(Errc::ConfigInvalid, name + ": needs at least one level");
  }
  if (capacity.size() != power_w.size()) {
    raise(Errc::ConfigInvalid,
          name + ": power_w and capacity must have equal length");
  }
  if (power_w.front() < 0.0) {
    raise(Errc::ConfigInvalid, name + ": power_w[0] must be >= 0");
  }
  if (idle_w < 0.0) raise(Errc::ConfigInvalid, name + ": idle_w must be >= 0");
  for (std::size_t i = 0; i < power_w.size(); ++i) {
    if (capacity[i] < 0.0) {
      raise(Errc::ConfigInvalid, name + ": capacity must be >= 0");
    }
    if (i == 0) continue;
    if (!(power_w[i] > power_w[i - 1])) {
      raise(Errc::ConfigInvalid,
            name + ": power_w must strictly increase with level");
    }
    if (capacity[i] < capacity[i - 1]) {
      raise(Errc::ConfigInvalid,
            name + ": capacity must be non-decreasing with level");
    }
  }
}

DeviceModel default_cpu_model() {
  return DeviceModel{{1.0, 2.5, 4.5}, {1.0, 2.2, 3.5}, 0.5};
}

DeviceModel default_gpu_model() {
  return DeviceModel{{0.5, 3.0, 7.5}, {1.0, 4.0, 9.0}, 0.5};
}

const char* to_string(Move m) {
  switch (m) {
    case Move::Up: return "Up";
    case Move::Keep: return "Keep";
    case Move::Down: return "Down";
  }
  return "?";
}

int action_index(Move cpu, Move gpu) {
  return 3 * static_cast<int>(cpu) + static_cast<int>(gpu);
}

std::pair<Move, Move> moves_of_index(int index) {
  if (index < 0 || index > 8) {
    raise(Errc::ShapeMismatch, "action index out of 0..8");
  }
  return {static_cast<Move>(index / 3), static_cast<Move>(index % 3)};
}

namespace {

Move threshold(double x, double tau) {
  if (x > tau) return Move::Up;
  if (x < -tau) return Move::Down;
  return Move::Keep;
}

int apply_move(int level, Move m, int levels) {
  switch (m) {
    case Move::Up: return std::min(level + 1, levels - 1);
    case Move::Down: return std::max(level - 1, 0);
    case Move::Keep: return level;
  }
  return level;
}

}  // namespace

JointAction decode_action(const Eigen::Vector2d& raw, double tau) {
  JointAction a;
  a.raw = raw;
  a.cpu_move = threshold(raw[0], tau);
  a.gpu_move = threshold(raw[1], tau);
  a.index = action_index(a.cpu_move, a.gpu_move);
  return a;
}

void EnvConfig::validate() const {
  cpu.validate("cpu");
  gpu.validate("gpu");
  if (!(dt_s > 0.0)) raise(Errc::ConfigInvalid, "dt must be > 0");
  if (alpha < 0.0 || beta < 0.0) {
    raise(Errc::ConfigInvalid, "alpha and beta must be >= 0");
  }
  if (!(tau > 0.0)) raise(Errc::ConfigInvalid, "tau must be > 0");
  if (horizon_steps < 0) raise(Errc::ConfigInvalid, "horizon must be >= 0");
  if (initial_cpu_level < 0 || initial_cpu_level >= cpu.levels()) {
    raise(Errc::ConfigInvalid, "initial cpu level out of range");
  }
  if (initial_gpu_level < 0 || initial_gpu_level >= gpu.levels()) {
    raise(Errc::ConfigInvalid, "initial gpu level out of range");
  }
  if (!(watts_per_work_unit > 0.0)) {
    raise(Errc::ConfigInvalid, "watts_per_work_unit must be > 0");
  }
  if (!(feature.p_max_w > 0.0) || !(feature.slope_ref_w_per_s > 0.0) ||
      !(feature.cv_ref > 0.0) || !(feature.cv_threshold > 0.0) ||
      !(feature.power_floor_w > 0.0)) {
    raise(Errc::ConfigInvalid, "feature references must be > 0");
  }
}

double reward(double power_w, double backlog, const EnvConfig& cfg,
              double backlog_ref) {
  return -cfg.alpha * (power_w / cfg.feature.p_max_w) -
         cfg.beta * (backlog / backlog_ref);
}

PowerEnv::PowerEnv(EnvConfig cfg, telemetry::PowerTrace workload)
    : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (workload.empty()) raise(Errc::EmptyTrace, "workload trace is empty");

  // Dense uniform grid guarantees every decision window holds enough
  // samples for window statistics.
  const double min_rate = 2.0 / cfg_.dt_s;
  workload_ = telemetry::resample(
      workload, std::max(workload.nominal_rate_hz, min_rate));

  const double t0 = workload_.start_time();
  const double span = workload_.span();
  int steps = static_cast<int>(std::floor(span / cfg_.dt_s + 1e-9));
  if (cfg_.horizon_steps > 0) steps = std::min(steps, cfg_.horizon_steps);
  if (steps < 1) {
    raise(Errc::TraceTooShort,
          "workload spans " + std::to_string(span) +
              " s; need at least one decision interval of " +
              std::to_string(cfg_.dt_s) + " s");
  }
  episode_steps_ = steps;

  demand_.resize(static_cast<std::size_t>(steps));
  cpu_stats_.resize(static_cast<std::size_t>(steps));
  gpu_stats_.resize(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const double a = t0 + k * cfg_.dt_s;
    const double b = std::min(t0 + (k + 1) * cfg_.dt_s, workload_.end_time());
    const double joules =
        telemetry::integrate_energy_mwh(workload_, a, b,
                                        telemetry::Channel::Total) *
        3.6;
    demand_[static_cast<std::size_t>(k)] = joules / cfg_.watts_per_work_unit;
    const double pad = 1e-9 * cfg_.dt_s;  // absorbs grid rounding at edges
    cpu_stats_[static_cast<std::size_t>(k)] = telemetry::window_stats(
        workload_, a - pad, b + pad, telemetry::Channel::Cpu);
    gpu_stats_[static_cast<std::size_t>(k)] = telemetry::window_stats(
        workload_, a - pad, b + pad, telemetry::Channel::Gpu);
  }
  max_step_demand_ = *std::max_element(demand_.begin(), demand_.end());
  backlog_ref_ = cfg_.feature.backlog_ref > 0.0 ? cfg_.feature.backlog_ref
                 : max_step_demand_ > 0.0       ? 2.0 * max_step_demand_
                                                : 1.0;
}

feature::Observation PowerEnv::observe() const {
  telemetry::WindowStats cpu{}, gpu{};
  if (steps_taken_ > 0) {
    cpu = cpu_stats_[static_cast<std::size_t>(steps_taken_ - 1)];
    gpu = gpu_stats_[static_cast<std::size_t>(steps_taken_ - 1)];
  }
  feature::FeatureConfig fc = cfg_.feature;
  fc.backlog_ref = backlog_ref_;
  return feature::build_observation(cpu, gpu, cpu_level_, cfg_.cpu.levels(),
                                    gpu_level_, cfg_.gpu.levels(), backlog_,
                                    fc);
}

feature::Observation PowerEnv::reset(std::uint64_t /*seed*/) {
  cpu_level_ = cfg_.initial_cpu_level;
  gpu_level_ = cfg_.initial_gpu_level;
  backlog_ = 0.0;
  steps_taken_ = 0;
  done_ = false;
  emitted_w_.clear();
  return observe();
}

StepOutcome PowerEnv::step(const JointAction& action) {
  if (done_) raise(Errc::SteppedAfterDone, "episode is over; reset first");

  cpu_level_ = apply_move(cpu_level_, action.cpu_move, cfg_.cpu.levels());
  gpu_level_ = apply_move(gpu_level_, action.gpu_move, cfg_.gpu.levels());

  const double d = demand_[static_cast<std::size_t>(steps_taken_)];
  const double capacity =
      cfg_.cpu.capacity[static_cast<std::size_t>(cpu_level_)] +
      cfg_.gpu.capacity[static_cast<std::size_t>(gpu_level_)];
  const double served = std::min(capacity * cfg_.dt_s, d + backlog_);
  backlog_ = backlog_ + d - served;

  const double cpu_w =
      cfg_.cpu.power_w[static_cast<std::size_t>(cpu_level_)] + cfg_.cpu.idle_w;
  const double gpu_w =
      cfg_.gpu.power_w[static_cast<std::size_t>(gpu_level_)] + cfg_.gpu.idle_w;
  const double power = cpu_w + gpu_w;

  emitted_w_.push_back(cpu_w);
  emitted_w_.push_back(gpu_w);

  ++steps_taken_;
  done_ = steps_taken_ >= episode_steps_;

  StepOutcome out;
  out.info.power_w = power;
  out.info.energy_mwh_step = power * cfg_.dt_s / 3.6;
  out.info.backlog = backlog_;
  out.info.served = served;
  out.info.violated = backlog_ > 0.0;
  out.reward = reward(power, backlog_, cfg_, backlog_ref_);
  out.done = done_;
  out.observation = observe();
  return out;
}

telemetry::PowerTrace PowerEnv::emitted_power_trace() const {
  if (emitted_w_.empty()) {
    raise(Errc::EmptyTrace, "no steps taken since reset");
  }
  const std::size_t steps = emitted_w_.size() / 2;
  std::vector<telemetry::PowerSample> samples;
  samples.reserve(2 * steps + 1);
  auto rail_sample = [](double t, double cpu_w, double gpu_w) {
    telemetry::PowerSample s;
    s.t_s = t;
    s.cpu_v = 5.0;
    s.cpu_i = cpu_w / 5.0;
    s.gpu_v = 5.0;
    s.gpu_i = gpu_w / 5.0;
    return s;
  };
  for (std::size_t k = 0; k < steps; ++k) {
    const double t_begin = static_cast<double>(k) * cfg_.dt_s;
    const double t_end = static_cast<double>(k + 1) * cfg_.dt_s;
    const double cpu_w = emitted_w_[2 * k];
    const double gpu_w = emitted_w_[2 * k + 1];
    samples.push_back(rail_sample(t_begin, cpu_w, gpu_w));
    // hold the level's power right up to the step boundary so the
    // staircase integrates like the per-step rectangle sum
    samples.push_back(
        rail_sample(std::nextafter(t_end, t_begin), cpu_w, gpu_w));
  }
  const double t_final = static_cast<double>(steps) * cfg_.dt_s;
  samples.push_back(
      rail_sample(t_final, emitted_w_[2 * (steps - 1)], emitted_w_.back()));
  return telemetry::make_trace(std::move(samples), 1.0 / cfg_.dt_s);
}

const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::AlwaysMax: return "always_max";
    case BaselineKind::AlwaysKeep: return "always_keep";
  }
  return "?";
}

Policy baseline_policy(BaselineKind kind) {
  const Move move = kind == BaselineKind::AlwaysMax ? Move::Up : Move::Keep;
  const double raw = kind == BaselineKind::AlwaysMax ? 1.0 : 0.0;
  return [move, raw](const feature::Observation&) {
    JointAction a;
    a.cpu_move = move;
    a.gpu_move = move;
    a.index = action_index(move, move);
    a.raw = Eigen::Vector2d{raw, raw};
    return a;
  };
}

EpisodeResult run_episode(PowerEnv& env, const Policy& policy,
                          std::uint64_t seed) {
  EpisodeResult result;
  feature::Observation obs = env.reset(seed);
  double reward_sum = 0.0;
  while (!env.done()) {
    StepOutcome out = env.step(policy(obs));
    obs = out.observation;
    reward_sum += out.reward;
    result.total_energy_mwh += out.info.energy_mwh_step;
    result.step_power_w.push_back(out.info.power_w);
    if (out.info.violated) ++result.violated_steps;
    ++result.steps;
  }
  result.mean_reward = result.steps > 0
                           ? reward_sum / static_cast<double>(result.steps)
                           : 0.0;
  result.power_trace = env.emitted_power_trace();
  return result;
}

OracleResult exhaustive_oracle(const EnvConfig& cfg,
                               const telemetry::PowerTrace& workload) {
  PowerEnv env(cfg, workload);
  const int lc = cfg.cpu.levels();
  const int lg = cfg.gpu.levels();
  if (lc > 3 || lg > 3 || lc * lg > 81) {
    raise(Errc::ConfigTooLarge, "oracle is limited to 3 levels per device");
  }
  if (env.episode_steps() > 50) {
    raise(Errc::ConfigTooLarge,
          "oracle is limited to 50-step episodes; got " +
              std::to_string(env.episode_steps()));
  }

  auto nth_map = [](long code, int length) {
    std::vector<Move> map(static_cast<std::size_t>(length));
    for (int i = 0; i < length; ++i) {
      map[static_cast<std::size_t>(i)] = static_cast<Move>(code % 3);
      code /= 3;
    }
    return map;
  };
  long n_cpu = 1, n_gpu = 1;
  for (int i = 0; i < lc; ++i) n_cpu *= 3;
  for (int i = 0; i < lg; ++i) n_gpu *= 3;

  OracleResult best;
  bool first = true;
  for (long cc = 0; cc < n_cpu; ++cc) {
    const std::vector<Move> cpu_map = nth_map(cc, lc);
    for (long gc = 0; gc < n_gpu; ++gc) {
      const std::vector<Move> gpu_map = nth_map(gc, lg);
      env.reset(0);
      double reward_sum = 0.0;
      int steps = 0;
      while (!env.done()) {
        JointAction a;
        a.cpu_move = cpu_map[static_cast<std::size_t>(env.cpu_level())];
        a.gpu_move = gpu_map[static_cast<std::size_t>(env.gpu_level())];
        a.index = action_index(a.cpu_move, a.gpu_move);
        reward_sum += env.step(a).reward;
        ++steps;
      }
      const double mean = reward_sum / static_cast<double>(steps);
      if (first || mean > best.mean_reward) {
        best.cpu_map = cpu_map;
        best.gpu_map = gpu_map;
        best.mean_reward = mean;
        first = false;
      }
    }
  }
  return best;
}

namespace {

telemetry::PowerSample split_rails(double t, double watts) {
  telemetry::PowerSample s;
  s.t_s = t;
  s.cpu_v = 5.0;
  s.cpu_i = 0.5 * watts / 5.0;
  s.gpu_v = 5.0;
  s.gpu_i = 0.5 * watts / 5.0;
  return s;
}

void check_synth_args(double duration_s, double rate_hz) {
  if (!(duration_s > 0.0) || !(rate_hz > 0.0)) {
    raise(Errc::ConfigInvalid, "duration and rate must be > 0");
  }
}

}  // namespace

telemetry::PowerTrace synth_constant(double watts, double duration_s,
                                     double rate_hz) {
  check_synth_args(duration_s, rate_hz);
  const auto n = std::max<long long>(1, std::llround(duration_s * rate_hz));
  std::vector<telemetry::PowerSample> samples;
  samples.reserve(static_cast<std::size_t>(n) + 1);
  for (long long j = 0; j <= n; ++j) {
    const double t = j == n ? duration_s
                            : duration_s * (static_cast<double>(j) /
                                            static_cast<double>(n));
    samples.push_back(split_rails(t, watts));
  }
  return telemetry::make_trace(std::move(samples), rate_hz);
}

telemetry::PowerTrace synth_square(double low_w, double high_w,
                                   double period_s, double duty,
                                   double duration_s, double rate_hz) {
  check_synth_args(duration_s, rate_hz);
  if (!(period_s > 0.0) || duty < 0.0 || duty > 1.0) {
    raise(Errc::ConfigInvalid, "square wave needs period > 0, duty in [0,1]");
  }
  auto level = [&](double t) {
    const double phase = t - period_s * std::floor(t / period_s);
    return phase < duty * period_s ? high_w : low_w;
  };
  // uniform grid plus a sample just before each edge keeps the wave
  // piecewise constant under linear interpolation
  std::vector<double> times;
  const auto n = std::max<long long>(1, std::llround(duration_s * rate_hz));
  for (long long j = 0; j <= n; ++j) {
    times.push_back(j == n ? duration_s
                           : duration_s * (static_cast<double>(j) /
                                           static_cast<double>(n)));
  }
  for (long long m = 0; static_cast<double>(m) * period_s <= duration_s; ++m) {
    const double rise = static_cast<double>(m) * period_s;
    const double fall = rise + duty * period_s;
    if (rise > 0.0 && rise <= duration_s) {
      times.push_back(std::nextafter(rise, 0.0));
    }
    if (fall > 0.0 && fall <= duration_s) {
      times.push_back(std::nextafter(fall, 0.0));
      if (fall < duration_s) times.push_back(fall);
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  std::vector<telemetry::PowerSample> samples;
  samples.reserve(times.size());
  for (double t : times) samples.push_back(split_rails(t, level(t)));
  return telemetry::make_trace(std::move(samples), rate_hz);
}

telemetry::PowerTrace synth_ramp(double start_w, double end_w,
                                 double duration_s, double rate_hz) {
  check_synth_args(duration_s, rate_hz);
  const auto n = std::max<long long>(1, std::llround(duration_s * rate_hz));
  std::vector<telemetry::PowerSample> samples;
  samples.reserve(static_cast<std::size_t>(n) + 1);
  for (long long j = 0; j <= n; ++j) {
    const double t = j == n ? duration_s
                            : duration_s * (static_cast<double>(j) /
                                            static_cast<double>(n));
    const double w = start_w + (end_w - start_w) * (t / duration_s);
    samples.push_back(split_rails(t, w));
  }
  return telemetry::make_trace(std::move(samples), rate_hz);
}

}  // namespace wattgov::envsim
