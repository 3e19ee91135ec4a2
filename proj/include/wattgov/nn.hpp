#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

namespace wattgov::nn {

// Parameter-shaped container, used for both gradients and optimizer moments.
struct Grads {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
};

// Activations captured by a cached forward pass, consumed by backward().
// `version` ties the cache to the exact parameter state that produced it.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> hidden;  // post-tanh, one per hidden layer
  std::uint64_t version = 0;
  bool valid = false;
};

// Fully connected net, tanh on hidden layers, identity output. Parameters
// mutate only through set_params/apply_step so the version counter stays
// honest for cache validation.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int in_dim, const std::vector<int>& hidden, int out_dim);

  // Scaled orthogonal init (QR of a Gaussian matrix); biases zero.
  void init_random(std::uint64_t seed, double hidden_gain, double output_gain);

  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }
  std::size_t layer_count() const { return w_.size(); }
  const std::vector<Eigen::MatrixXd>& weights() const { return w_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }
  std::uint64_t param_version() const { return version_; }

  void set_params(std::vector<Eigen::MatrixXd> w, std::vector<Eigen::VectorXd> b);

  // params += delta (optimizer hook). Raises ShapeMismatch.
  void apply_step(const Grads& delta);

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  // Batch layout: columns are samples (in_dim x n -> out_dim x n).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;

  // Gradients of sum_ij upstream_ij * output_ij w.r.t. every parameter
  // (summed over the batch; fold any 1/n into upstream). Raises StaleCache
  // when the cache is missing or predates a parameter change.
  Grads backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;

  Grads zero_grads() const;

 private:
  int in_dim_ = 0;
  int out_dim_ = 0;
  std::vector<Eigen::MatrixXd> w_;
  std::vector<Eigen::VectorXd> b_;
  std::uint64_t version_ = 1;
};

// Central finite differences against the same scalar sum_ij upstream*output;
// debugging aid and test oracle for backward().
Grads finite_difference_grads(const Mlp& net, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& upstream, double h = 1e-5);

// log N(a; mu, diag(exp(log_std))^2)
double gaussian_log_prob(const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& a);

// Column-wise over a batch: mu, a are dim x n; returns 1 x n of log probs.
Eigen::RowVectorXd gaussian_log_prob_batch(const Eigen::MatrixXd& mu,
                                           const Eigen::VectorXd& log_std,
                                           const Eigen::MatrixXd& a);

// Standard-normal stream via Box-Muller over mt19937_64. Self-contained so
// sampled trajectories are reproducible across platforms and libstdc++
// versions (std::normal_distribution is not).
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : gen_(seed) {}
  double next();

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

struct ActionSample {
  Eigen::VectorXd action;
  double log_prob = 0.0;
};

// a = mu + exp(log_std) * z, z ~ N(0, I)
ActionSample sample_action(const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& log_std, NormalSampler& rng);

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

void clamp_log_std(Eigen::VectorXd& log_std);

// Adam (beta1 0.9, beta2 0.999, eps 1e-8, bias correction).
struct AdamState {
  Grads m, v;
  long long step = 0;
};

AdamState make_adam_state(const Mlp& net);
void adam_update(Mlp& net, const Grads& grads, double lr, AdamState& state);

struct AdamVecState {
  Eigen::VectorXd m, v;
  long long step = 0;
};

AdamVecState make_adam_state(const Eigen::VectorXd& params);
void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                 double lr, AdamVecState& state);

}  // namespace wattgov::nn
