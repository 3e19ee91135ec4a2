#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "wattgov/envsim.hpp"
#include "wattgov/feature.hpp"
#include "wattgov/nn.hpp"

namespace wattgov::ppo {

struct Transition {
  feature::Observation obs;
  Eigen::Vector2d raw_action{0.0, 0.0};
  double log_prob_old = 0.0;  // under the policy that produced the action
  double reward = 0.0;
  double value = 0.0;  // critic estimate at collection time
  bool done = false;
};

// Fixed-capacity on-policy store. An update consumes the whole buffer and
// clears it; clear_count tracks that no transition ever survives an update.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(int capacity);

  void push(const Transition& t);  // raises ShapeMismatch when full
  bool full() const { return size() == capacity_; }
  int size() const { return static_cast<int>(transitions_.size()); }
  int capacity() const { return capacity_; }
  void clear();

  std::span<const Transition> transitions() const { return transitions_; }
  long long clear_count() const { return clear_count_; }

  // critic value of the state after the last transition; 0 when it ended
  // an episode
  double bootstrap_value = 0.0;

 private:
  int capacity_;
  std::vector<Transition> transitions_;
  long long clear_count_ = 0;
};

struct TrainConfig {
  int sample_step = 3000;
  int epochs = 200;
  double gamma = 0.99;
  double lambda = 0.97;
  double clip_eps = 0.2;
  double policy_lr = 3e-4;
  double value_lr = 1e-3;
  int train_policy_iters = 80;
  int train_value_iters = 80;
  double target_kl = 0.01;
  std::vector<int> hidden = {64, 64};
  std::uint64_t seed = 0;
  bool use_gae = false;  // advantage = sum of (gamma*lambda)^k deltas

  void validate() const;  // raises ConfigInvalid naming the bad field
};

struct EpochMetrics {
  int epoch = 0;
  double mean_reward = 0.0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double mean_log_prob = 0.0;
  double approx_kl = 0.0;
  int policy_iters_run = 0;
};

// Reward-to-go over one uninterrupted segment:
// R[T-1] = r[T-1] + gamma * bootstrap, R[t] = r[t] + gamma * R[t+1].
// Raises EmptySequence.
std::vector<double> discounted_returns(std::span<const double> rewards,
                                       double gamma, double bootstrap_value);

// Whole-buffer returns: splits at done flags (bootstrap 0 there) and applies
// buffer.bootstrap_value to the trailing unfinished segment.
std::vector<double> buffer_returns(const RolloutBuffer& buffer, double gamma);

std::vector<double> raw_advantages(std::span<const double> returns,
                                   std::span<const double> values);

// (A - mean) / (std + 1e-8), population std
std::vector<double> normalize_advantages(std::span<const double> raw);

// raw_advantages then normalize_advantages
std::vector<double> advantages(std::span<const double> returns,
                               std::span<const double> values);

// mean of squared raw advantages == MSE between returns and values
double critic_loss(std::span<const double> raw_adv);

double importance_ratio(double log_prob_new, double log_prob_old);

// -mean(min(ratio*A, clip(ratio, 1-eps, 1+eps)*A))
double clipped_actor_loss(std::span<const double> ratio,
                          std::span<const double> adv, double clip_eps);

double approx_kl(std::span<const double> log_prob_old,
                 std::span<const double> log_prob_new);

// Actor (2 means + trainable log_std) and critic (scalar value).
struct ActorCritic {
  nn::Mlp actor;
  Eigen::VectorXd log_std;
  nn::Mlp critic;

  Eigen::Vector2d action_mean(const feature::Observation& obs) const;
  double value(const feature::Observation& obs) const;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, envsim::PowerEnv env);

  // Runs the policy for sample_step transitions, stitching episodes
  // end to end; the acting networks stay fixed throughout.
  RolloutBuffer collect_rollout();

  // One full update: returns/advantages, clipped actor steps with KL early
  // stop, critic regression, old <- new sync, buffer cleared.
  EpochMetrics update(RolloutBuffer& buffer);  // raises BufferNotFull

  std::vector<EpochMetrics> train();

  const TrainConfig& config() const { return cfg_; }
  const ActorCritic& agent() const { return new_; }
  const ActorCritic& old_agent() const { return old_; }
  envsim::PowerEnv& env() { return env_; }

  // deterministic-mean controller for evaluation
  envsim::Policy deterministic_policy() const;

  nn::AdamState& actor_opt() { return actor_opt_; }
  nn::AdamVecState& log_std_opt() { return log_std_opt_; }
  nn::AdamState& critic_opt() { return critic_opt_; }
  ActorCritic& agent_mut() { return new_; }
  void sync_old();  // old_ <- new_

 private:
  TrainConfig cfg_;
  envsim::PowerEnv env_;
  ActorCritic new_;
  ActorCritic old_;
  nn::AdamState actor_opt_;
  nn::AdamVecState log_std_opt_;
  nn::AdamState critic_opt_;
  nn::NormalSampler rng_;
  feature::Observation obs_;
  std::uint64_t episode_count_ = 0;
  int epoch_count_ = 0;
};

}  // namespace wattgov::ppo
