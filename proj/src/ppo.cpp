#include "wattgov/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wattgov/errors.hpp"

namespace wattgov::ppo {

RolloutBuffer::RolloutBuffer(int capacity) : capacity_(capacity) {
  if (capacity < 1) raise(Errc::ConfigInvalid, "buffer capacity must be >= 1");
  transitions_.reserve(static_cast<std::size_t>(capacity));
}

void RolloutBuffer::push(const Transition& t) {
  if (full()) raise(Errc::ShapeMismatch, "buffer already holds its capacity");
  transitions_.push_back(t);
}

void RolloutBuffer::clear() {
  transitions_.clear();
  bootstrap_value = 0.0;
  ++clear_count_;
}

void TrainConfig::validate() const {
  if (sample_step < 1) raise(Errc::ConfigInvalid, "Sample_Step must be >= 1");
  if (epochs < 1) raise(Errc::ConfigInvalid, "Reuse_Times must be >= 1");
  if (!(gamma > 0.0) || gamma > 1.0) {
    raise(Errc::ConfigInvalid, "Gamma out of (0,1]");
  }
  if (!(lambda > 0.0) || lambda > 1.0) {
    raise(Errc::ConfigInvalid, "Lambda_Entropy out of (0,1]");
  }
  if (!(clip_eps > 0.0) || !(clip_eps < 1.0)) {
    raise(Errc::ConfigInvalid, "clip_eps out of (0,1)");
  }
  if (!(policy_lr > 0.0)) {
    raise(Errc::ConfigInvalid, "Policy_Learning_Rate must be > 0");
  }
  if (!(value_lr > 0.0)) {
    raise(Errc::ConfigInvalid, "Value_Function_Learning_Rate must be > 0");
  }
  if (train_policy_iters < 1) {
    raise(Errc::ConfigInvalid, "Train_Policy_Iterations must be >= 1");
  }
  if (train_value_iters < 1) {
    raise(Errc::ConfigInvalid, "Train_Value_Iterations must be >= 1");
  }
  if (target_kl < 0.0) raise(Errc::ConfigInvalid, "Target_kl must be >= 0");
  if (hidden.empty()) raise(Errc::ConfigInvalid, "Hidden_Sizes must be non-empty");
  for (int h : hidden) {
    if (h < 1) raise(Errc::ConfigInvalid, "Hidden_Sizes entries must be >= 1");
  }
}

std::vector<double> discounted_returns(std::span<const double> rewards,
                                       double gamma, double bootstrap_value) {
  if (rewards.empty()) raise(Errc::EmptySequence, "no rewards");
  std::vector<double> returns(rewards.size());
  double acc = bootstrap_value;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    returns[t] = acc;
  }
  return returns;
}

std::vector<double> buffer_returns(const RolloutBuffer& buffer, double gamma) {
  const auto ts = buffer.transitions();
  if (ts.empty()) raise(Errc::EmptySequence, "empty buffer");
  std::vector<double> returns(ts.size());
  double acc = ts.back().done ? 0.0 : buffer.bootstrap_value;
  for (std::size_t t = ts.size(); t-- > 0;) {
    // a done flag closes the segment ending at t; t's own reward still
    // discounts toward the value beyond t, handled by the order below
    acc = ts[t].reward + gamma * acc;
    returns[t] = acc;
    if (t > 0 && ts[t - 1].done) acc = 0.0;
  }
  return returns;
}

std::vector<double> raw_advantages(std::span<const double> returns,
                                   std::span<const double> values) {
  if (returns.size() != values.size()) {
    raise(Errc::LengthMismatch, "returns and values differ in length");
  }
  std::vector<double> adv(returns.size());
  for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = returns[i] - values[i];
  return adv;
}

std::vector<double> normalize_advantages(std::span<const double> raw) {
  if (raw.empty()) raise(Errc::EmptySequence, "no advantages");
  const double n = static_cast<double>(raw.size());
  double mean = 0.0;
  for (double a : raw) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : raw) var += (a - mean) * (a - mean);
  var /= n;
  const double denom = std::sqrt(var) + 1e-8;
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - mean) / denom;
  return out;
}

std::vector<double> advantages(std::span<const double> returns,
                               std::span<const double> values) {
  return normalize_advantages(raw_advantages(returns, values));
}

double critic_loss(std::span<const double> raw_adv) {
  if (raw_adv.empty()) raise(Errc::EmptySequence, "no advantages");
  double acc = 0.0;
  for (double a : raw_adv) acc += a * a;
  return acc / static_cast<double>(raw_adv.size());
}

double importance_ratio(double log_prob_new, double log_prob_old) {
  return std::exp(log_prob_new - log_prob_old);
}

double clipped_actor_loss(std::span<const double> ratio,
                          std::span<const double> adv, double clip_eps) {
  if (ratio.size() != adv.size()) {
    raise(Errc::LengthMismatch, "ratio and advantages differ in length");
  }
  if (ratio.empty()) raise(Errc::EmptySequence, "no samples");
  double acc = 0.0;
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    const double clipped =
        std::clamp(ratio[i], 1.0 - clip_eps, 1.0 + clip_eps) * adv[i];
    acc += std::min(ratio[i] * adv[i], clipped);
  }
  return -acc / static_cast<double>(ratio.size());
}

double approx_kl(std::span<const double> log_prob_old,
                 std::span<const double> log_prob_new) {
  if (log_prob_old.size() != log_prob_new.size()) {
    raise(Errc::LengthMismatch, "log prob sequences differ in length");
  }
  if (log_prob_old.empty()) raise(Errc::EmptySequence, "no samples");
  double acc = 0.0;
  for (std::size_t i = 0; i < log_prob_old.size(); ++i) {
    acc += log_prob_old[i] - log_prob_new[i];
  }
  return acc / static_cast<double>(log_prob_old.size());
}

Eigen::Vector2d ActorCritic::action_mean(
    const feature::Observation& obs) const {
  const auto arr = obs.as_array();
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
  return Eigen::Vector2d(actor.forward(x));
}

double ActorCritic::value(const feature::Observation& obs) const {
  const auto arr = obs.as_array();
  Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
  return critic.forward(x)[0];
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Trainer::Trainer(TrainConfig cfg, envsim::PowerEnv env)
    : cfg_(std::move(cfg)),
      env_(std::move(env)),
      rng_(mix_seed(cfg_.seed, 3)) {
  cfg_.validate();
  new_.actor = nn::Mlp(feature::Observation::kDim, cfg_.hidden, 2);
  new_.actor.init_random(mix_seed(cfg_.seed, 1), 1.0, 0.01);
  new_.log_std = Eigen::VectorXd::Constant(2, -0.5);
  new_.critic = nn::Mlp(feature::Observation::kDim, cfg_.hidden, 1);
  new_.critic.init_random(mix_seed(cfg_.seed, 2), 1.0, 1.0);
  old_ = new_;
  actor_opt_ = nn::make_adam_state(new_.actor);
  log_std_opt_ = nn::make_adam_state(new_.log_std);
  critic_opt_ = nn::make_adam_state(new_.critic);
  obs_ = env_.reset(episode_count_++);
}

void Trainer::sync_old() { old_ = new_; }

RolloutBuffer Trainer::collect_rollout() {
  RolloutBuffer buffer(cfg_.sample_step);
  const double tau = env_.config().tau;
  Eigen::VectorXd x(feature::Observation::kDim);
  while (!buffer.full()) {
    const auto arr = obs_.as_array();
    x = Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
    const Eigen::VectorXd mu = new_.actor.forward(x);
    const nn::ActionSample sample = nn::sample_action(mu, new_.log_std, rng_);
    const double value = new_.critic.forward(x)[0];

    envsim::JointAction action =
        envsim::decode_action(Eigen::Vector2d(sample.action), tau);
    action.log_prob = sample.log_prob;
    const envsim::StepOutcome outcome = env_.step(action);

    Transition t;
    t.obs = obs_;
    t.raw_action = Eigen::Vector2d(sample.action);
    t.log_prob_old = sample.log_prob;
    t.reward = outcome.reward;
    t.value = value;
    t.done = outcome.done;
    buffer.push(t);

    obs_ = outcome.done ? env_.reset(episode_count_++) : outcome.observation;
  }
  if (buffer.transitions().back().done) {
    buffer.bootstrap_value = 0.0;
  } else {
    const auto arr = obs_.as_array();
    x = Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
    buffer.bootstrap_value = new_.critic.forward(x)[0];
  }
  return buffer;
}

EpochMetrics Trainer::update(RolloutBuffer& buffer) {
  if (!buffer.full()) {
    raise(Errc::BufferNotFull, "update needs a full buffer; holds " +
                                   std::to_string(buffer.size()) + " of " +
                                   std::to_string(buffer.capacity()));
  }
  const auto ts = buffer.transitions();
  const int n = static_cast<int>(ts.size());
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::MatrixXd obs(feature::Observation::kDim, n);
  Eigen::MatrixXd act(2, n);
  Eigen::RowVectorXd lp_old(n);
  double reward_sum = 0.0;
  for (int j = 0; j < n; ++j) {
    const auto arr = ts[static_cast<std::size_t>(j)].obs.as_array();
    obs.col(j) = Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
    act.col(j) = ts[static_cast<std::size_t>(j)].raw_action;
    lp_old[j] = ts[static_cast<std::size_t>(j)].log_prob_old;
    reward_sum += ts[static_cast<std::size_t>(j)].reward;
  }

  const std::vector<double> returns = buffer_returns(buffer, cfg_.gamma);
  const Eigen::RowVectorXd values = new_.critic.forward(obs);

  std::vector<double> adv_raw(static_cast<std::size_t>(n));
  if (cfg_.use_gae) {
    // generalized advantages over stored values; the critic is unchanged
    // since collection, so stored values equal a fresh forward pass
    double acc = 0.0;
    for (int t = n - 1; t >= 0; --t) {
      const auto ut = static_cast<std::size_t>(t);
      const double v_next = ts[ut].done ? 0.0
                            : t == n - 1 ? buffer.bootstrap_value
                                         : ts[ut + 1].value;
      const double delta =
          ts[ut].reward + cfg_.gamma * v_next - ts[ut].value;
      acc = ts[ut].done ? delta : delta + cfg_.gamma * cfg_.lambda * acc;
      adv_raw[ut] = acc;
    }
  } else {
    for (int j = 0; j < n; ++j) {
      adv_raw[static_cast<std::size_t>(j)] = returns[static_cast<std::size_t>(j)] - values[j];
    }
  }

  EpochMetrics metrics;
  metrics.mean_reward = reward_sum * inv_n;
  metrics.critic_loss = critic_loss(adv_raw);
  metrics.mean_log_prob = lp_old.sum() * inv_n;

  const std::vector<double> adv_v = normalize_advantages(adv_raw);
  const Eigen::RowVectorXd adv =
      Eigen::Map<const Eigen::RowVectorXd>(adv_v.data(), n);

  // ratio denominator comes from a fresh pass of the acting policy
  const Eigen::RowVectorXd lp_anchor =
      nn::gaussian_log_prob_batch(old_.actor.forward(obs), old_.log_std, act);

  nn::ForwardCache cache;
  Eigen::MatrixXd mu = new_.actor.forward(obs, cache);
  const double lo = 1.0 - cfg_.clip_eps;
  const double hi = 1.0 + cfg_.clip_eps;

  for (int iter = 1; iter <= cfg_.train_policy_iters; ++iter) {
    const Eigen::ArrayXd inv_var = (-2.0 * new_.log_std.array()).exp();
    const Eigen::RowVectorXd lp_new =
        nn::gaussian_log_prob_batch(mu, new_.log_std, act);
    const Eigen::ArrayXd ratio =
        (lp_new - lp_anchor).array().exp().transpose();
    const Eigen::ArrayXd adv_a = adv.transpose().array();

    const Eigen::ArrayXd unclipped = ratio * adv_a;
    const Eigen::ArrayXd clipped = ratio.min(hi).max(lo) * adv_a;
    metrics.actor_loss = -unclipped.min(clipped).mean();

    // d loss / d lp_new, zero where the clipped branch is active
    const Eigen::ArrayXd dlp =
        (unclipped <= clipped)
            .select(-inv_n * unclipped, Eigen::ArrayXd::Zero(n));

    const Eigen::MatrixXd diff = act - mu;  // (a - mu)
    const Eigen::MatrixXd upstream =
        ((diff.array().colwise() * inv_var).rowwise() * dlp.transpose())
            .matrix();
    const nn::Grads g_actor = new_.actor.backward(cache, upstream);

    const Eigen::ArrayXXd z2 =
        (diff.array().colwise() * inv_var.sqrt()).square();
    const Eigen::VectorXd g_log_std =
        ((z2.rowwise() * dlp.transpose()).rowwise().sum() -
         Eigen::ArrayXd::Constant(2, dlp.sum()))
            .matrix();

    nn::adam_update(new_.actor, g_actor, cfg_.policy_lr, actor_opt_);
    nn::adam_update(new_.log_std, g_log_std, cfg_.policy_lr, log_std_opt_);
    nn::clamp_log_std(new_.log_std);

    mu = new_.actor.forward(obs, cache);
    const Eigen::RowVectorXd lp_post =
        nn::gaussian_log_prob_batch(mu, new_.log_std, act);
    metrics.approx_kl = (lp_old - lp_post).mean();
    metrics.policy_iters_run = iter;
    if (metrics.approx_kl > cfg_.target_kl) break;
  }

  const Eigen::RowVectorXd r_target =
      Eigen::Map<const Eigen::RowVectorXd>(returns.data(), n);
  nn::ForwardCache vcache;
  for (int iter = 0; iter < cfg_.train_value_iters; ++iter) {
    const Eigen::RowVectorXd v = new_.critic.forward(obs, vcache);
    const Eigen::MatrixXd upstream = (2.0 * inv_n) * (v - r_target);
    const nn::Grads g = new_.critic.backward(vcache, upstream);
    nn::adam_update(new_.critic, g, cfg_.value_lr, critic_opt_);
  }

  sync_old();
  buffer.clear();
  return metrics;
}

std::vector<EpochMetrics> Trainer::train() {
  std::vector<EpochMetrics> history;
  history.reserve(static_cast<std::size_t>(cfg_.epochs));
  for (int e = 1; e <= cfg_.epochs; ++e) {
    RolloutBuffer buffer = collect_rollout();
    EpochMetrics m = update(buffer);
    m.epoch = e;
    history.push_back(m);
  }
  return history;
}

envsim::Policy Trainer::deterministic_policy() const {
  ActorCritic agent = new_;
  const double tau = env_.config().tau;
  return [agent = std::move(agent), tau](const feature::Observation& obs) {
    const Eigen::Vector2d mu = agent.action_mean(obs);
    envsim::JointAction a = envsim::decode_action(mu, tau);
    a.log_prob = 0.0;
    return a;
  };
}

}  // namespace wattgov::ppo
