#include "wattgov/nn.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "wattgov/errors.hpp"

namespace wattgov::nn {

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

// QR-based orthogonal matrix, sign-fixed so the result is deterministic.
Eigen::MatrixXd orthogonal(int rows, int cols, double gain, NormalSampler& rng) {
  const bool tall = rows >= cols;
  const int hi = tall ? rows : cols;
  const int lo = tall ? cols : rows;
  Eigen::MatrixXd a(hi, lo);
  for (int j = 0; j < lo; ++j) {
    for (int i = 0; i < hi; ++i) a(i, j) = rng.next();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(hi, lo);
  Eigen::MatrixXd r = qr.matrixQR().topRows(lo).triangularView<Eigen::Upper>();
  for (int j = 0; j < lo; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  if (!tall) q.transposeInPlace();
  return gain * q;
}

void check_same_shape(const Grads& a, const std::vector<Eigen::MatrixXd>& w,
                      const std::vector<Eigen::VectorXd>& b) {
  if (a.w.size() != w.size() || a.b.size() != b.size()) {
    raise(Errc::ShapeMismatch, "layer count differs");
  }
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (a.w[l].rows() != w[l].rows() || a.w[l].cols() != w[l].cols() ||
        a.b[l].size() != b[l].size()) {
      raise(Errc::ShapeMismatch, "parameter shape differs at layer " +
                                     std::to_string(l));
    }
  }
}

}  // namespace

Mlp::Mlp(int in_dim, const std::vector<int>& hidden, int out_dim)
    : in_dim_(in_dim), out_dim_(out_dim) {
  if (in_dim < 1 || out_dim < 1) {
    raise(Errc::ShapeMismatch, "layer dimensions must be positive");
  }
  int prev = in_dim;
  for (int h : hidden) {
    if (h < 1) raise(Errc::ShapeMismatch, "hidden size must be positive");
    w_.emplace_back(Eigen::MatrixXd::Zero(h, prev));
    b_.emplace_back(Eigen::VectorXd::Zero(h));
    prev = h;
  }
  w_.emplace_back(Eigen::MatrixXd::Zero(out_dim, prev));
  b_.emplace_back(Eigen::VectorXd::Zero(out_dim));
}

void Mlp::init_random(std::uint64_t seed, double hidden_gain,
                      double output_gain) {
  NormalSampler rng(seed);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    const double gain = (l + 1 == w_.size()) ? output_gain : hidden_gain;
    w_[l] = orthogonal(static_cast<int>(w_[l].rows()),
                       static_cast<int>(w_[l].cols()), gain, rng);
    b_[l].setZero();
  }
  ++version_;
}

void Mlp::set_params(std::vector<Eigen::MatrixXd> w,
                     std::vector<Eigen::VectorXd> b) {
  if (w.size() != w_.size() || b.size() != b_.size()) {
    raise(Errc::ShapeMismatch, "layer count differs");
  }
  for (std::size_t l = 0; l < w.size(); ++l) {
    if (w[l].rows() != w_[l].rows() || w[l].cols() != w_[l].cols() ||
        b[l].size() != b_[l].size()) {
      raise(Errc::ShapeMismatch, "parameter shape differs at layer " +
                                     std::to_string(l));
    }
  }
  w_ = std::move(w);
  b_ = std::move(b);
  ++version_;
}

void Mlp::apply_step(const Grads& delta) {
  check_same_shape(delta, w_, b_);
  for (std::size_t l = 0; l < w_.size(); ++l) {
    w_[l] += delta.w[l];
    b_[l] += delta.b[l];
  }
  ++version_;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  return Eigen::VectorXd(forward(Eigen::MatrixXd(x)));
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != in_dim_) {
    raise(Errc::ShapeMismatch, "input has " + std::to_string(x.rows()) +
                                   " rows, net expects " +
                                   std::to_string(in_dim_));
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    a = ((w_[l] * a).colwise() + b_[l]).array().tanh().matrix();
  }
  return (w_.back() * a).colwise() + b_.back();
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x,
                             ForwardCache& cache) const {
  if (x.rows() != in_dim_) {
    raise(Errc::ShapeMismatch, "input has " + std::to_string(x.rows()) +
                                   " rows, net expects " +
                                   std::to_string(in_dim_));
  }
  cache.input = x;
  cache.hidden.clear();
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l + 1 < w_.size(); ++l) {
    a = ((w_[l] * a).colwise() + b_[l]).array().tanh().matrix();
    cache.hidden.push_back(a);
  }
  cache.version = version_;
  cache.valid = true;
  return (w_.back() * a).colwise() + b_.back();
}

Grads Mlp::backward(const ForwardCache& cache,
                    const Eigen::MatrixXd& upstream) const {
  if (!cache.valid || cache.version != version_) {
    raise(Errc::StaleCache,
          "backward needs a forward cache from the current parameters");
  }
  if (upstream.rows() != out_dim_ || upstream.cols() != cache.input.cols()) {
    raise(Errc::ShapeMismatch, "upstream gradient is " +
                                   std::to_string(upstream.rows()) + "x" +
                                   std::to_string(upstream.cols()));
  }
  Grads g = zero_grads();
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = w_.size(); l-- > 0;) {
    const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.hidden[l - 1];
    g.w[l] = delta * below.transpose();
    g.b[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (w_[l].transpose() * delta).array() *
              (1.0 - cache.hidden[l - 1].array().square());
    }
  }
  return g;
}

Grads Mlp::zero_grads() const {
  Grads g;
  g.w.reserve(w_.size());
  g.b.reserve(b_.size());
  for (std::size_t l = 0; l < w_.size(); ++l) {
    g.w.emplace_back(Eigen::MatrixXd::Zero(w_[l].rows(), w_[l].cols()));
    g.b.emplace_back(Eigen::VectorXd::Zero(b_[l].size()));
  }
  return g;
}

Grads finite_difference_grads(const Mlp& net, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& upstream, double h) {
  auto scalar = [&](const Mlp& m) {
    return (upstream.array() * m.forward(x).array()).sum();
  };
  Grads g = net.zero_grads();
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    std::vector<Eigen::MatrixXd> w = net.weights();
    std::vector<Eigen::VectorXd> b = net.biases();
    for (Eigen::Index i = 0; i < w[l].size(); ++i) {
      Mlp probe = net;
      w[l](i) += h;
      probe.set_params(w, b);
      const double up = scalar(probe);
      w[l](i) -= 2.0 * h;
      probe.set_params(w, b);
      const double down = scalar(probe);
      w[l](i) += h;
      g.w[l](i) = (up - down) / (2.0 * h);
    }
    for (Eigen::Index i = 0; i < b[l].size(); ++i) {
      Mlp probe = net;
      b[l](i) += h;
      probe.set_params(w, b);
      const double up = scalar(probe);
      b[l](i) -= 2.0 * h;
      probe.set_params(w, b);
      const double down = scalar(probe);
      b[l](i) += h;
      g.b[l](i) = (up - down) / (2.0 * h);
    }
  }
  return g;
}

double gaussian_log_prob(const Eigen::VectorXd& mu,
                         const Eigen::VectorXd& log_std,
                         const Eigen::VectorXd& a) {
  if (mu.size() != log_std.size() || mu.size() != a.size()) {
    raise(Errc::ShapeMismatch, "mu, log_std, a dimensions differ");
  }
  constexpr double half_log_2pi = 0.9189385332046727;  // 0.5*log(2*pi)
  double lp = 0.0;
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    const double z = (a[d] - mu[d]) / std::exp(log_std[d]);
    lp += -0.5 * z * z - log_std[d] - half_log_2pi;
  }
  return lp;
}

Eigen::RowVectorXd gaussian_log_prob_batch(const Eigen::MatrixXd& mu,
                                           const Eigen::VectorXd& log_std,
                                           const Eigen::MatrixXd& a) {
  if (mu.rows() != log_std.size() || mu.rows() != a.rows() ||
      mu.cols() != a.cols()) {
    raise(Errc::ShapeMismatch, "mu, log_std, a dimensions differ");
  }
  constexpr double half_log_2pi = 0.9189385332046727;
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  Eigen::ArrayXXd z = (a - mu).array().colwise() * inv_std;
  Eigen::RowVectorXd lp =
      (-0.5 * z.square()).colwise().sum().matrix();
  lp.array() -= log_std.sum() + half_log_2pi * static_cast<double>(mu.rows());
  return lp;
}

double NormalSampler::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // 53-bit uniforms; u1 shifted into (0, 1] so the log is finite
  const double u1 =
      1.0 - static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

ActionSample sample_action(const Eigen::VectorXd& mu,
                           const Eigen::VectorXd& log_std, NormalSampler& rng) {
  ActionSample s;
  s.action.resize(mu.size());
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    s.action[d] = mu[d] + std::exp(log_std[d]) * rng.next();
  }
  s.log_prob = gaussian_log_prob(mu, log_std, s.action);
  return s;
}

void clamp_log_std(Eigen::VectorXd& log_std) {
  log_std = log_std.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

AdamState make_adam_state(const Mlp& net) {
  AdamState s;
  s.m = net.zero_grads();
  s.v = net.zero_grads();
  return s;
}

void adam_update(Mlp& net, const Grads& grads, double lr, AdamState& state) {
  check_same_shape(grads, net.weights(), net.biases());
  check_same_shape(state.m, net.weights(), net.biases());
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  Grads delta = net.zero_grads();
  for (std::size_t l = 0; l < grads.w.size(); ++l) {
    state.m.w[l] = kAdamBeta1 * state.m.w[l] + (1.0 - kAdamBeta1) * grads.w[l];
    state.v.w[l].array() = kAdamBeta2 * state.v.w[l].array() +
                           (1.0 - kAdamBeta2) * grads.w[l].array().square();
    delta.w[l].array() = -lr * (state.m.w[l].array() / bc1) /
                         ((state.v.w[l].array() / bc2).sqrt() + kAdamEps);
    state.m.b[l] = kAdamBeta1 * state.m.b[l] + (1.0 - kAdamBeta1) * grads.b[l];
    state.v.b[l].array() = kAdamBeta2 * state.v.b[l].array() +
                           (1.0 - kAdamBeta2) * grads.b[l].array().square();
    delta.b[l].array() = -lr * (state.m.b[l].array() / bc1) /
                         ((state.v.b[l].array() / bc2).sqrt() + kAdamEps);
  }
  net.apply_step(delta);
}

AdamVecState make_adam_state(const Eigen::VectorXd& params) {
  AdamVecState s;
  s.m = Eigen::VectorXd::Zero(params.size());
  s.v = Eigen::VectorXd::Zero(params.size());
  return s;
}

void adam_update(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
                 double lr, AdamVecState& state) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    raise(Errc::ShapeMismatch, "adam vector state size differs");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
  state.m = kAdamBeta1 * state.m + (1.0 - kAdamBeta1) * grads;
  state.v.array() = kAdamBeta2 * state.v.array() +
                    (1.0 - kAdamBeta2) * grads.array().square();
  params.array() -= lr * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + kAdamEps);
}

}  // namespace wattgov::nn
