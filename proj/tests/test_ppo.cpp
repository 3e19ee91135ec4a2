#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "wattgov/envsim.hpp"
#include "wattgov/errors.hpp"
#include "wattgov/nn.hpp"
#include "wattgov/ppo.hpp"

using namespace wattgov;
using ppo::RolloutBuffer;
using ppo::TrainConfig;
using ppo::Trainer;
using ppo::Transition;

namespace {

envsim::PowerEnv tiny_env() {
  envsim::EnvConfig cfg;
  cfg.horizon_steps = 50;
  cfg.initial_cpu_level = 2;
  cfg.initial_gpu_level = 2;
  return envsim::PowerEnv(cfg, envsim::synth_constant(1.5, 6.0, 200.0));
}

TrainConfig small_train_config() {
  TrainConfig cfg;
  cfg.sample_step = 200;
  cfg.epochs = 2;
  cfg.hidden = {16, 16};
  cfg.seed = 3;
  return cfg;
}

Transition make_t(double reward, bool done) {
  Transition t;
  t.reward = reward;
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("discounted returns propagate backward through time") {
  std::vector<double> r{1.0, 1.0, 1.0};
  auto returns = ppo::discounted_returns(r, 0.99, 0.0);
  REQUIRE(returns.size() == 3);
  CHECK(returns[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(returns[1] == doctest::Approx(1.99).epsilon(1e-15));
  CHECK(returns[0] == doctest::Approx(2.9701).epsilon(1e-15));

  std::vector<double> r2{1.0, 2.0};
  auto boot = ppo::discounted_returns(r2, 0.99, 3.0);
  CHECK(boot[1] == doctest::Approx(2.0 + 0.99 * 3.0).epsilon(1e-15));
  CHECK(boot[0] == doctest::Approx(1.0 + 0.99 * boot[1]).epsilon(1e-15));

  CHECK_THROWS_AS(ppo::discounted_returns({}, 0.99, 0.0), Error);
}

TEST_CASE("discounted returns match a quadratic-time rollup") {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> rw(-2.0, 2.0);
  std::uniform_int_distribution<int> len(1, 40);
  for (double gamma : {0.0, 0.5, 0.99, 1.0}) {
    for (int c = 0; c < 125; ++c) {
      const int n = len(gen);
      std::vector<double> rewards(static_cast<std::size_t>(n));
      for (auto& r : rewards) r = rw(gen);
      const double bootstrap = rw(gen);
      auto fast = ppo::discounted_returns(rewards, gamma, bootstrap);
      for (int t = 0; t < n; ++t) {
        double want = 0.0, g = 1.0;
        for (int k = t; k < n; ++k) {
          want += g * rewards[static_cast<std::size_t>(k)];
          g *= gamma;
        }
        want += g * bootstrap;
        CHECK(fast[static_cast<std::size_t>(t)] ==
              doctest::Approx(want).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("buffer returns restart at episode boundaries") {
  RolloutBuffer buffer(5);
  buffer.push(make_t(1.0, false));
  buffer.push(make_t(2.0, true));  // first episode ends here
  buffer.push(make_t(3.0, false));
  buffer.push(make_t(4.0, false));
  buffer.push(make_t(5.0, false));  // buffer ends mid-episode
  buffer.bootstrap_value = 10.0;
  auto returns = ppo::buffer_returns(buffer, 0.5);
  CHECK(returns[4] == doctest::Approx(5.0 + 0.5 * 10.0).epsilon(1e-15));
  CHECK(returns[3] == doctest::Approx(4.0 + 0.5 * returns[4]).epsilon(1e-15));
  CHECK(returns[2] == doctest::Approx(3.0 + 0.5 * returns[3]).epsilon(1e-15));
  // the done at index 1 cuts the chain: nothing from episode two leaks back
  CHECK(returns[1] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(returns[0] == doctest::Approx(1.0 + 0.5 * 2.0).epsilon(1e-15));
}

TEST_CASE("bootstrap is ignored when the buffer ends on a done") {
  RolloutBuffer buffer(2);
  buffer.push(make_t(1.0, false));
  buffer.push(make_t(2.0, true));
  buffer.bootstrap_value = 99.0;
  auto returns = ppo::buffer_returns(buffer, 0.9);
  CHECK(returns[1] == doctest::Approx(2.0));
  CHECK(returns[0] == doctest::Approx(1.0 + 0.9 * 2.0));
}

TEST_CASE("advantage normalization centers and scales") {
  std::vector<double> returns{2.0, 4.0, 6.0};
  std::vector<double> values{1.0, 1.0, 1.0};
  auto raw = ppo::raw_advantages(returns, values);
  CHECK(raw[0] == 1.0);
  CHECK(raw[2] == 5.0);
  auto norm = ppo::normalize_advantages(raw);
  double mean = (norm[0] + norm[1] + norm[2]) / 3.0;
  double var = 0.0;
  for (double a : norm) var += (a - mean) * (a - mean);
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::sqrt(var / 3.0) == doctest::Approx(1.0).epsilon(1e-7));
  // constant advantages normalize to zero, not NaN
  std::vector<double> flat{3.0, 3.0, 3.0};
  for (double a : ppo::normalize_advantages(flat)) CHECK(a == 0.0);

  std::vector<double> short_values{1.0};
  CHECK_THROWS_AS(ppo::raw_advantages(returns, short_values), Error);
}

TEST_CASE("critic loss is the mean squared advantage") {
  std::vector<double> adv{1.0, -2.0, 3.0};
  CHECK(ppo::critic_loss(adv) == doctest::Approx(14.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(ppo::critic_loss({}), Error);
}

TEST_CASE("importance ratio is the exponentiated log prob gap") {
  CHECK(ppo::importance_ratio(std::log(2.0), 0.0) ==
        doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ppo::importance_ratio(-1.0, -1.0) == doctest::Approx(1.0));
}

TEST_CASE("clipped objective caps the gain from ratio drift") {
  std::vector<double> ratio{2.0};
  std::vector<double> adv{1.0};
  // positive advantage: gain saturates at 1 + eps
  CHECK(ppo::clipped_actor_loss(ratio, adv, 0.2) ==
        doctest::Approx(-1.2).epsilon(1e-15));
  ratio[0] = 10.0;
  CHECK(ppo::clipped_actor_loss(ratio, adv, 0.2) ==
        doctest::Approx(-1.2).epsilon(1e-15));
  // negative advantage with shrinking ratio: the unclipped branch would
  // soften the penalty, the objective keeps the clipped one
  ratio[0] = 0.5;
  adv[0] = -1.0;
  CHECK(ppo::clipped_actor_loss(ratio, adv, 0.2) ==
        doctest::Approx(0.8).epsilon(1e-15));
  // inside the trust band the clip is inactive
  ratio[0] = 1.1;
  adv[0] = 2.0;
  CHECK(ppo::clipped_actor_loss(ratio, adv, 0.2) ==
        doctest::Approx(-2.2).epsilon(1e-15));
}

TEST_CASE("clipped objective is never more optimistic than either branch") {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> rdist(0.05, 3.0);
  std::uniform_real_distribution<double> adist(-2.0, 2.0);
  for (int c = 0; c < 1000; ++c) {
    std::vector<double> ratio(8), adv(8);
    for (int i = 0; i < 8; ++i) {
      ratio[static_cast<std::size_t>(i)] = rdist(gen);
      adv[static_cast<std::size_t>(i)] = adist(gen);
    }
    const double loss = ppo::clipped_actor_loss(ratio, adv, 0.2);
    double plain = 0.0, clipped_only = 0.0;
    for (int i = 0; i < 8; ++i) {
      plain += ratio[static_cast<std::size_t>(i)] * adv[static_cast<std::size_t>(i)];
      clipped_only += std::clamp(ratio[static_cast<std::size_t>(i)], 0.8, 1.2) *
                      adv[static_cast<std::size_t>(i)];
    }
    CHECK(loss >= -plain / 8.0 - 1e-12);
    CHECK(loss >= -clipped_only / 8.0 - 1e-12);
  }
  std::vector<double> two{1.0, 1.0};
  std::vector<double> one{1.0};
  CHECK_THROWS_AS(ppo::clipped_actor_loss(two, one, 0.2), Error);
  CHECK_THROWS_AS(ppo::clipped_actor_loss({}, {}, 0.2), Error);
}

TEST_CASE("approx kl averages the log prob regression") {
  std::vector<double> old_lp{-1.0, -2.0};
  std::vector<double> new_lp{-1.5, -2.5};
  CHECK(ppo::approx_kl(old_lp, new_lp) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ppo::approx_kl(old_lp, old_lp) == 0.0);
  std::vector<double> shorter{-1.0};
  CHECK_THROWS_AS(ppo::approx_kl(old_lp, shorter), Error);
}

TEST_CASE("rollout buffer enforces its capacity discipline") {
  RolloutBuffer buffer(2);
  CHECK(buffer.capacity() == 2);
  CHECK_FALSE(buffer.full());
  buffer.push(make_t(1.0, false));
  buffer.push(make_t(2.0, false));
  CHECK(buffer.full());
  try {
    buffer.push(make_t(3.0, false));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ShapeMismatch);
  }
  buffer.bootstrap_value = 5.0;
  buffer.clear();
  CHECK(buffer.size() == 0);
  CHECK(buffer.bootstrap_value == 0.0);
  CHECK(buffer.clear_count() == 1);
  CHECK_THROWS_AS(RolloutBuffer(0), Error);
}

TEST_CASE("train config validation names the offending knob") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.clip_eps = 1.5;
  try {
    cfg.validate();
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ConfigInvalid);
    CHECK(std::string(e.what()).find("clip_eps out of (0,1)") !=
          std::string::npos);
  }
  cfg = TrainConfig{};
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.epochs = 0;
  try {
    cfg.validate();
    FAIL("expected ConfigInvalid");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("Reuse_Times") != std::string::npos);
  }
  cfg = TrainConfig{};
  cfg.hidden = {};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.target_kl = -0.1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("collected rollouts are reproducible and honestly labeled") {
  Trainer a(small_train_config(), tiny_env());
  Trainer b(small_train_config(), tiny_env());
  RolloutBuffer ba = a.collect_rollout();
  RolloutBuffer bb = b.collect_rollout();
  REQUIRE(ba.size() == 200);
  const auto ta = ba.transitions();
  const auto tb = bb.transitions();
  for (int i = 0; i < 200; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    CHECK(ta[ui].reward == tb[ui].reward);
    CHECK(ta[ui].raw_action == tb[ui].raw_action);
    CHECK(ta[ui].log_prob_old == tb[ui].log_prob_old);
    // 50-step horizon: episode boundaries land exactly on multiples of 50
    CHECK(ta[ui].done == ((i + 1) % 50 == 0));
  }
  CHECK(ba.bootstrap_value == 0.0);  // ends exactly on an episode boundary

  // stored log probs are recomputable from the acting policy
  for (int i = 0; i < 200; i += 17) {
    const auto ui = static_cast<std::size_t>(i);
    const auto arr = ta[ui].obs.as_array();
    Eigen::VectorXd x =
        Eigen::Map<const Eigen::VectorXd>(arr.data(), arr.size());
    const double lp = nn::gaussian_log_prob(
        a.agent().actor.forward(x), a.agent().log_std,
        Eigen::VectorXd(ta[ui].raw_action));
    CHECK(std::abs(lp - ta[ui].log_prob_old) < 1e-12);
  }
}

TEST_CASE("update demands a full buffer and then consumes it") {
  Trainer trainer(small_train_config(), tiny_env());
  RolloutBuffer partial(200);
  partial.push(make_t(1.0, false));
  try {
    trainer.update(partial);
    FAIL("expected BufferNotFull");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BufferNotFull);
    CHECK(e.exit_class() == 3);
  }

  RolloutBuffer buffer = trainer.collect_rollout();
  ppo::EpochMetrics m = trainer.update(buffer);
  CHECK(buffer.size() == 0);
  CHECK(buffer.clear_count() == 1);
  CHECK(std::isfinite(m.actor_loss));
  CHECK(std::isfinite(m.critic_loss));
  CHECK(m.critic_loss > 0.0);
  CHECK(m.policy_iters_run >= 1);
  CHECK(m.policy_iters_run <= trainer.config().train_policy_iters);
  // acting policy catches up with the learner after the update
  CHECK(trainer.agent().actor.weights()[0] ==
        trainer.old_agent().actor.weights()[0]);
  CHECK(trainer.agent().log_std == trainer.old_agent().log_std);
}

TEST_CASE("metrics reflect the collected batch") {
  Trainer trainer(small_train_config(), tiny_env());
  RolloutBuffer buffer = trainer.collect_rollout();
  double reward_sum = 0.0, lp_sum = 0.0;
  for (const auto& t : buffer.transitions()) {
    reward_sum += t.reward;
    lp_sum += t.log_prob_old;
  }
  ppo::EpochMetrics m = trainer.update(buffer);
  CHECK(m.mean_reward == doctest::Approx(reward_sum / 200.0).epsilon(1e-12));
  CHECK(m.mean_log_prob == doctest::Approx(lp_sum / 200.0).epsilon(1e-12));
}

TEST_CASE("unbounded kl target runs every policy iteration") {
  TrainConfig cfg = small_train_config();
  cfg.target_kl = 1e9;
  cfg.train_policy_iters = 7;
  Trainer trainer(cfg, tiny_env());
  RolloutBuffer buffer = trainer.collect_rollout();
  CHECK(trainer.update(buffer).policy_iters_run == 7);
}

TEST_CASE("lambda one generalized advantages equal plain returns minus values") {
  TrainConfig plain_cfg = small_train_config();
  // fixed iteration count: keeps the comparison free of early-stop branching
  plain_cfg.target_kl = 1e9;
  plain_cfg.train_policy_iters = 5;
  TrainConfig gae_cfg = plain_cfg;
  gae_cfg.use_gae = true;
  gae_cfg.lambda = 1.0;
  Trainer plain(plain_cfg, tiny_env());
  Trainer gae(gae_cfg, tiny_env());
  RolloutBuffer pb = plain.collect_rollout();
  RolloutBuffer gb = gae.collect_rollout();
  ppo::EpochMetrics pm = plain.update(pb);
  ppo::EpochMetrics gm = gae.update(gb);
  // the two advantage estimators telescope to the same values, so the whole
  // update sequence coincides
  CHECK(pm.critic_loss == doctest::Approx(gm.critic_loss).epsilon(1e-9));
  CHECK(pm.actor_loss == doctest::Approx(gm.actor_loss).epsilon(1e-9));
  CHECK(pm.approx_kl == doctest::Approx(gm.approx_kl).epsilon(1e-9));
  CHECK(pm.policy_iters_run == 5);
  CHECK(gm.policy_iters_run == 5);
}

TEST_CASE("training runs epochs in order and is seed deterministic") {
  TrainConfig cfg = small_train_config();
  Trainer a(cfg, tiny_env());
  Trainer b(cfg, tiny_env());
  auto ha = a.train();
  auto hb = b.train();
  REQUIRE(ha.size() == 2);
  CHECK(ha[0].epoch == 1);
  CHECK(ha[1].epoch == 2);
  for (std::size_t i = 0; i < ha.size(); ++i) {
    CHECK(ha[i].mean_reward == hb[i].mean_reward);
    CHECK(ha[i].critic_loss == hb[i].critic_loss);
    CHECK(ha[i].actor_loss == hb[i].actor_loss);
    CHECK(ha[i].approx_kl == hb[i].approx_kl);
  }

  cfg.seed = 4;
  Trainer c(cfg, tiny_env());
  auto hc = c.train();
  CHECK(hc[0].mean_reward != ha[0].mean_reward);  // seed actually matters
}

TEST_CASE("deterministic policy thresholds the mean action") {
  Trainer trainer(small_train_config(), tiny_env());
  envsim::Policy policy = trainer.deterministic_policy();
  feature::Observation obs = trainer.env().reset(0);
  const envsim::JointAction a = policy(obs);
  const Eigen::Vector2d mu = trainer.agent().action_mean(obs);
  const envsim::JointAction want =
      envsim::decode_action(mu, trainer.env().config().tau);
  CHECK(a.index == want.index);
  CHECK(a.cpu_move == want.cpu_move);
  CHECK(a.gpu_move == want.gpu_move);
}

TEST_CASE("trainer rejects invalid hyperparameters at construction") {
  TrainConfig cfg = small_train_config();
  cfg.clip_eps = 0.0;
  CHECK_THROWS_AS(Trainer(cfg, tiny_env()), Error);
}
