#include <doctest.h>

#include <cmath>

#include "semmec/mappo.hpp"

using namespace semmec;

namespace {

EnvConfig small_env() {
  EnvConfig c;
  c.n_ues = 3;
  c.queue_len = 4;
  return c;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

PpoBatch sample_batch(const ActorCritic& ac, const EnvConfig& env, const PpoHyper& hyper) {
  const auto model = EnvModel::build(env);
  const std::vector<RolloutSeed> seeds{{1, 2}, {3, 4}};
  const auto trs = collect_rollouts(ac, model, seeds, 1);
  ValueNorm norm;
  return build_batch(trs, hyper, norm);
}

}  // namespace

TEST_CASE("GAE with lambda 1 equals the Monte-Carlo advantage") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const int len = 1 + static_cast<int>(rng.index(30));
    std::vector<double> r(static_cast<std::size_t>(len)), v(static_cast<std::size_t>(len) + 1, 0.0);
    for (auto& x : r) x = rng.normal();
    for (int i = 0; i < len; ++i) v[static_cast<std::size_t>(i)] = rng.normal();
    const double gamma = rng.uniform(0.0, 0.999);
    const auto adv = compute_gae(r, v, gamma, 1.0);
    for (int i = 0; i < len; ++i) {
      double g = 0, d = 1;
      for (int j = i; j < len; ++j, d *= gamma) g += d * r[static_cast<std::size_t>(j)];
      CHECK(std::abs(adv[static_cast<std::size_t>(i)] - (g - v[static_cast<std::size_t>(i)])) < 1e-10);
    }
  }
}

TEST_CASE("GAE with lambda near 0 equals the one-step TD error") {
  const std::vector<double> r{1.0, -0.5, 2.0};
  const std::vector<double> v{0.3, 0.1, -0.2, 0.0};
  const auto adv = compute_gae(r, v, 0.9, 1e-12);
  for (std::size_t t = 0; t < 3; ++t) CHECK(adv[t] == doctest::Approx(r[t] + 0.9 * v[t + 1] - v[t]).epsilon(1e-9));
}

TEST_CASE("clipped objective") {
  CHECK(clipped_objective(1.5, 2.0, 0.2) == doctest::Approx(2.4));
  CHECK(clipped_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  CHECK(clipped_objective(1.0, 3.0, 0.2) == 3.0);
  CHECK(clipped_objective(0.9, 1.0, 0.2) == doctest::Approx(0.9));
}

TEST_CASE("importance ratio is exactly one at the sampling parameters") {
  const EnvConfig env = small_env();
  Rng rng(2);
  const ActorCritic ac = ActorCritic::create(PolicyConfig{}, env, rng);
  PpoHyper hyper;
  const PpoBatch b = sample_batch(ac, env, hyper);
  const PpoLoss loss = ppo_loss(ac, b, hyper, false);
  double mean_adv = 0;
  for (double a : b.advantages) mean_adv += a;
  mean_adv /= static_cast<double>(b.size());
  for (double r : loss.ratios) CHECK(r == 1.0);
  CHECK(std::abs(loss.surrogate - mean_adv) < 1e-12);
}

TEST_CASE("stored log-probs match recomputed ones") {
  const EnvConfig env = small_env();
  Rng rng(3);
  const ActorCritic ac = ActorCritic::create(PolicyConfig{}, env, rng);
  const Trajectory tr = collect_episode(ac, EnvModel::build(env), 5, 6);
  const Eigen::MatrixXd heads = ac.actor.forward(tr.actor_in);
  for (Eigen::Index c = 0; c < heads.cols(); ++c) {
    const std::span<const double> h(heads.col(c).data(), static_cast<std::size_t>(heads.rows()));
    const double lp = head_log_prob(h, ac.log_std, ac.layout(), tr.actions[static_cast<std::size_t>(c)], true);
    CHECK(std::abs(lp - tr.log_probs[static_cast<std::size_t>(c)]) < 1e-10);
  }
}

TEST_CASE("PPO loss gradients match finite differences") {
  const EnvConfig env = small_env();
  for (AdvantageEstimator est : {AdvantageEstimator::Exogenous, AdvantageEstimator::Gae}) {
    Rng rng(4);
    ActorCritic ac = ActorCritic::create(PolicyConfig{}, env, rng);
    PpoHyper hyper;
    hyper.advantage_estimator = est;
    const PpoBatch b = sample_batch(ac, env, hyper);
    // Small move away from the sampling parameters keeps every ratio inside the clip range.
    for (double& p : ac.actor.mutable_params()) p += 1e-3 * rng.normal();
    for (double& p : ac.log_std) p += 1e-3 * rng.normal();
    const PpoLoss base = ppo_loss(ac, b, hyper, true);
    for (double r : base.ratios) REQUIRE(std::abs(r - 1.0) < 0.1);

    auto f = [&](const ActorCritic& m) { return -ppo_loss(m, b, hyper, false).combined; };
    const double h = 1e-6;
    auto check_block = [&](auto get, const std::vector<double>& grad) {
      Rng pick(9);
      const std::size_t count = std::min<std::size_t>(grad.size(), 40);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t i = grad.size() <= 40 ? k : pick.index(grad.size());
        ActorCritic up = ac, down = ac;
        get(up)[i] += h;
        get(down)[i] -= h;
        const double fd = (f(up) - f(down)) / (2 * h);
        if (std::abs(fd) < 1e-7 && std::abs(grad[i]) < 1e-7) continue;
        CHECK(rel_err(fd, grad[i]) <= 1e-4);
      }
    };
    check_block([](ActorCritic& m) { return m.actor.mutable_params(); }, base.actor_grad);
    check_block([](ActorCritic& m) { return std::span<double>(m.log_std); }, base.log_std_grad);
    check_block([](ActorCritic& m) { return m.critic.mutable_params(); }, base.critic_grad);
  }
}

TEST_CASE("rollouts do not depend on the thread count") {
  const EnvConfig env = small_env();
  Rng rng(5);
  const ActorCritic ac = ActorCritic::create(PolicyConfig{}, env, rng);
  std::vector<RolloutSeed> seeds;
  for (std::uint64_t i = 0; i < 6; ++i) seeds.push_back({10 + i, 20 + i});
  const auto model = EnvModel::build(env);
  const auto one = collect_rollouts(ac, model, seeds, 1);
  const auto many = collect_rollouts(ac, model, seeds, 4);
  REQUIRE(one.size() == many.size());
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].rewards == many[i].rewards);
    CHECK(one[i].log_probs == many[i].log_probs);
  }
}

TEST_CASE("short training run logs one row per episode and is reproducible") {
  const EnvConfig env = small_env();
  PpoHyper hyper;
  hyper.episodes = 5;
  const auto a = train_mappo(env, PolicyConfig{}, hyper, 7);
  const auto b = train_mappo(env, PolicyConfig{}, hyper, 7);
  REQUIRE(a.log.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.log[i].episode == static_cast<int>(i) + 1);
    CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
    CHECK(std::isfinite(a.log[i].critic_loss));
  }
  CHECK(std::equal(a.model.actor.params().begin(), a.model.actor.params().end(), b.model.actor.params().begin()));
}

TEST_CASE("a vanishing learning rate leaves the policy unchanged") {
  const EnvConfig env = small_env();
  PpoHyper hyper;
  hyper.episodes = 3;
  hyper.lr = 1e-12;
  const auto r = train_mappo(env, PolicyConfig{}, hyper, 8);
  Rng init(derive_seed(8, 1));
  const ActorCritic start = ActorCritic::create(PolicyConfig{}, env, init);
  for (std::size_t i = 0; i < start.actor.param_count(); ++i)
    CHECK(std::abs(r.model.actor.params()[i] - start.actor.params()[i]) < 1e-9);
}

TEST_CASE("divergence is reported with diagnostics") {
  PpoHyper hyper;
  hyper.episodes = 10;
  hyper.divergence_reward = 10.0;  // every reward is below this
  hyper.divergence_window = 3;
  CHECK_THROWS_AS(train_mappo(small_env(), PolicyConfig{}, hyper, 9), TrainingDiverged);
}

TEST_CASE("invalid hyperparameters are rejected") {
  PpoHyper h;
  h.gamma = 1.0;
  CHECK_THROWS(h.validate());
  h = {};
  h.lambda = 0.0;
  CHECK_THROWS(h.validate());
  h = {};
  h.clip_eps = 0.0;
  CHECK_THROWS(h.validate());
}
