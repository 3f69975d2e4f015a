#include <doctest.h>

#include <cmath>

#include "semmec/d3qn.hpp"

using namespace semmec;

namespace {

Transition make_transition(Rng& rng, int features, std::size_t action, bool done) {
  Transition t;
  t.obs.resize(static_cast<std::size_t>(features));
  t.next_obs.resize(static_cast<std::size_t>(features));
  for (auto& x : t.obs) x = rng.normal();
  for (auto& x : t.next_obs) x = rng.normal();
  t.action = action;
  t.reward = rng.normal();
  t.done = done;
  return t;
}

}  // namespace

TEST_CASE("action table sizes and round trip") {
  const EnvConfig cfg;
  const auto aware = DiscreteActionTable::build(cfg, true);
  const auto unaware = DiscreteActionTable::build(cfg, false);
  CHECK(aware.size() == 603);
  CHECK(unaware.size() == 63);
  for (std::size_t i = 0; i < aware.size(); ++i) {
    const AgentAction& a = aware.decode(i);
    CHECK(aware.encode(a) == i);
    CHECK_NOTHROW(a.validate(cfg));
  }
  for (std::size_t i = 0; i < unaware.size(); ++i) CHECK(unaware.decode(i).mu == 1.0);
  CHECK_THROWS_AS(aware.encode(AgentAction::local(1.234e9)), std::invalid_argument);
  CHECK(aware.mu_grid().front() == cfg.mu_min);
  CHECK(aware.mu_grid().back() == 1.0);
}

TEST_CASE("dueling aggregation ignores a constant shift of the advantages") {
  Rng rng(1);
  Eigen::MatrixXd out = Eigen::MatrixXd::Random(6, 3);
  const Eigen::MatrixXd q = dueling_q(out);
  out.bottomRows(5).array() += 4.2;
  CHECK((dueling_q(out) - q).cwiseAbs().maxCoeff() < 1e-12);
  // Q = V + A - mean(A)
  CHECK(q(2, 1) == doctest::Approx(out(0, 1) + out(3, 1) - out.col(1).tail(5).mean()));
}

TEST_CASE("double-DQN targets") {
  Rng rng(2);
  Mlp online({4, 8, 6}), target({4, 8, 6});
  online.init(rng, 1.0, 1.0);
  target.init(rng, 1.0, 1.0);
  std::vector<Transition> ts;
  for (int i = 0; i < 8; ++i) ts.push_back(make_transition(rng, 4, 0, i % 2 == 0));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  const auto y = double_dqn_targets(online, target, batch, 0.9);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].done) {
      CHECK(y[i] == ts[i].reward);
      continue;
    }
    const Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(ts[i].next_obs.data(), 4);
    const Eigen::MatrixXd qo = dueling_q(online.forward(Eigen::MatrixXd(next)));
    const Eigen::MatrixXd qt = dueling_q(target.forward(Eigen::MatrixXd(next)));
    Eigen::Index best = 0;
    qo.col(0).maxCoeff(&best);
    CHECK(y[i] == doctest::Approx(ts[i].reward + 0.9 * qt(best, 0)).epsilon(1e-12));
  }
  // With identical networks the double target is the vanilla max target.
  const auto same = double_dqn_targets(online, online, batch, 0.9);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i].done) continue;
    const Eigen::VectorXd next = Eigen::Map<const Eigen::VectorXd>(ts[i].next_obs.data(), 4);
    const double mx = dueling_q(online.forward(Eigen::MatrixXd(next))).maxCoeff();
    CHECK(same[i] == doctest::Approx(ts[i].reward + 0.9 * mx).epsilon(1e-12));
  }
}

TEST_CASE("TD loss gradient matches finite differences") {
  Rng rng(3);
  Mlp online({5, 8, 8, 7});
  online.init(rng, 1.0, 1.0);
  std::vector<Transition> ts;
  for (int i = 0; i < 6; ++i) ts.push_back(make_transition(rng, 5, rng.index(6), false));
  std::vector<const Transition*> batch;
  for (const auto& t : ts) batch.push_back(&t);
  std::vector<double> y(batch.size());
  for (auto& v : y) v = rng.normal();
  const QUpdate u = q_loss(online, batch, y);
  const double h = 1e-6;
  for (std::size_t i = 0; i < online.param_count(); ++i) {
    Mlp up = online, down = online;
    up.mutable_params()[i] += h;
    down.mutable_params()[i] -= h;
    const double fd = (q_loss(up, batch, y).loss - q_loss(down, batch, y).loss) / (2 * h);
    if (std::abs(fd) < 1e-8 && std::abs(u.grad[i]) < 1e-8) continue;
    CHECK(std::abs(fd - u.grad[i]) / std::max(std::abs(fd), std::abs(u.grad[i])) <= 1e-4);
  }
}

TEST_CASE("replay buffer keeps the newest items up to capacity") {
  ReplayBuffer buf(3);
  Rng rng(4);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    buf.push(t);
  }
  CHECK(buf.size() == 3);
  Rng a(5), b(5);
  const auto s1 = buf.sample(50, a);
  const auto s2 = buf.sample(50, b);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i] == s2[i]);
    CHECK(s1[i]->reward >= 2.0);
  }
  CHECK_THROWS(ReplayBuffer(0));
}

TEST_CASE("epsilon schedule") {
  D3qnHyper h;
  h.episodes = 100;
  CHECK(h.epsilon(0) == 1.0);
  CHECK(h.epsilon(25) == doctest::Approx(0.525));
  CHECK(h.epsilon(50) == doctest::Approx(0.05));
  CHECK(h.epsilon(99) == doctest::Approx(0.05));
}

TEST_CASE("short D3QN run is reproducible and its policy acts on the grid") {
  EnvConfig env;
  env.n_ues = 3;
  env.queue_len = 4;
  D3qnHyper h;
  h.episodes = 10;
  const FeatureSpec spec{env.k_channels, false, true};
  const auto a = train_d3qn(env, spec, true, h, 3);
  const auto b = train_d3qn(env, spec, true, h, 3);
  REQUIRE(a.log.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a.log[i].mean_reward == b.log[i].mean_reward);
  const D3qnPolicy policy(a.model);
  Env e(env, 11);
  const auto obs = e.reset();
  for (const auto& act : policy.act(e.state(), obs)) CHECK_NOTHROW(act.validate(env));
  const QNetwork back = qnetwork_from_json(nlohmann::json::parse(qnetwork_to_json(a.model).dump()), env);
  CHECK(std::equal(back.net.params().begin(), back.net.params().end(), a.model.net.params().begin()));
}
