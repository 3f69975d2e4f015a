#include <doctest.h>

#include <numeric>

#include "reference_model.hpp"
#include "semmec/env.hpp"

using namespace semmec;

namespace {

std::vector<AgentAction> all_local(const EnvConfig& c) {
  return std::vector<AgentAction>(static_cast<std::size_t>(c.n_ues), AgentAction::local(c.ue.clock_hz));
}

}  // namespace

TEST_CASE("default config carries the reference simulation parameters") {
  const EnvConfig c;
  CHECK(c.n_ues == 4);
  CHECK(c.bandwidth_hz == 10e6);
  CHECK(c.queue_len == 20);
  CHECK(c.noise_w == 2e-3);
  CHECK(c.p_min_w == 0.010);
  CHECK(c.p_max_w == 0.090);
  CHECK(c.mu_min == 0.1);
  CHECK(c.ue.cuda_cores == 1280);
  CHECK(c.f_min_hz == 1.5e9);
  CHECK(c.f_max_hz == 1.7e9);
  CHECK(c.es.cuda_cores == 65536);
  CHECK(c.es.clock_hz == 2.2e9);
  CHECK(c.ue.energy_coeff == 1e-26);
  CHECK(c.es.energy_coeff == 1.2e-26);
  CHECK(c.eps_min == 0.5);
  CHECK(c.t_max_s == 5e-3);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("reset is deterministic and shaped by the config") {
  Env a(EnvConfig{}, 9), b(EnvConfig{}, 9);
  const auto oa = a.reset(), ob = b.reset();
  REQUIRE(oa.size() == 4);
  for (std::size_t i = 0; i < oa.size(); ++i) {
    CHECK(oa[i].gains.size() == 4);
    CHECK(oa[i].gains == ob[i].gains);
    CHECK(oa[i].l_u == ob[i].l_u);
  }
  CHECK(a.state().fading == b.state().fading);
  CHECK(a.reset(123)[0].gains == b.reset(123)[0].gains);
}

TEST_CASE("degenerate task mix yields a single task type") {
  EnvConfig c;
  c.task_mix = {1.0, 0.0, 0.0};
  Env env(c, 4);
  env.reset();
  while (!env.done()) {
    for (const auto& t : env.state().tasks) CHECK(t.type == TaskType::Text);
    env.step(all_local(c));
  }
}

TEST_CASE("local execution earns exactly one half") {
  EnvConfig c;
  Env env(c, 11);
  env.reset();
  int steps = 0;
  while (!env.done()) {
    const StepResult r = env.step(all_local(c));
    for (double x : r.rewards) CHECK(x == doctest::Approx(0.5).epsilon(1e-12));
    ++steps;
  }
  CHECK(steps == c.queue_len);
  CHECK_THROWS_AS(env.step(all_local(c)), std::logic_error);
}

TEST_CASE("constraint margins") {
  const EnvConfig c;
  TaskOutcome o;
  o.latency = 7e-3;
  o.energy = 0.01;
  o.accuracy = 0.9;
  auto v = check_constraints(o, c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].constraint == Constraint::Latency);
  CHECK(v[0].margin == doctest::Approx(-0.002).epsilon(1e-12));
  o.latency = 4e-3;
  CHECK(check_constraints(o, c).empty());
  o.accuracy = 0.45;
  v = check_constraints(o, c);
  REQUIRE(v.size() == 1);
  CHECK(v[0].margin == doctest::Approx(-0.05).epsilon(1e-12));
}

TEST_CASE("a violated task is rewarded with the sum of its margins") {
  EnvConfig c;
  c.n_ues = 1;
  c.k_channels = 1;
  const auto model = EnvModel::build(c);
  StepState s;
  s.fading = Eigen::MatrixXd::Constant(1, 1, 1e-6);  // deep fade
  s.distances_m = {150};
  s.gains = gains_from_fading(s.fading, s.distances_m, c);
  s.tasks = {model->load(TaskType::Vqa)};
  const std::vector<AgentAction> a{AgentAction::offloading(0, 0.09, 1.6e9, 1.0)};
  const StepResult r = evaluate_step(*model, s, a);
  const auto& o = r.outcomes[0];
  REQUIRE(!o.violations.empty());
  double sum = 0;
  for (const auto& v : o.violations) sum += v.margin;
  CHECK(r.rewards[0] == doctest::Approx(sum).epsilon(1e-14));
  CHECK(earned_qoe(o) == 0.0);

  c.violation_mode = ViolationMode::First;
  const StepResult first = evaluate_step(*EnvModel::build(c), s, a);
  CHECK(first.rewards[0] == doctest::Approx(first.outcomes[0].violations.front().margin));
}

TEST_CASE("conflicting offloaders fall back to local with a penalty") {
  EnvConfig c;
  Env env(c, 3);
  env.reset();
  std::vector<AgentAction> a = all_local(c);
  a[0] = AgentAction::offloading(3, 0.05, c.ue.clock_hz, 0.5);
  a[1] = AgentAction::offloading(3, 0.05, c.ue.clock_hz, 0.5);
  const StepResult r = env.step(a);
  for (int i : {0, 1}) {
    const auto& o = r.outcomes[static_cast<std::size_t>(i)];
    CHECK(o.conflict);
    CHECK(!o.offloaded);
    CHECK(o.mu == 1.0);
    CHECK(r.rewards[static_cast<std::size_t>(i)] == doctest::Approx(0.5 - c.conflict_penalty));
    CHECK(earned_qoe(o) == doctest::Approx(0.5));
  }
  CHECK(r.rewards[2] == doctest::Approx(0.5));
}

TEST_CASE("successful tasks are rewarded with their QoE and hold distinct channels") {
  EnvConfig c;
  Env env(c, 21);
  Rng rng(2);
  for (int ep = 0; ep < 20; ++ep) {
    env.reset(static_cast<std::uint64_t>(ep));
    while (!env.done()) {
      std::vector<AgentAction> a;
      for (int i = 0; i < c.n_ues; ++i) {
        if (rng.uniform() < 0.3) a.push_back(AgentAction::local(rng.uniform(c.f_min_hz, c.f_max_hz)));
        else
          a.push_back(AgentAction::offloading(static_cast<int>(rng.index(4)), rng.uniform(0.01, 0.09),
                                              rng.uniform(c.f_min_hz, c.f_max_hz), rng.uniform(0.1, 1.0)));
      }
      const StepResult r = env.step(a);
      std::vector<int> held(4, 0);
      double shares = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const auto& o = r.outcomes[i];
        if (o.offloaded) ++held[static_cast<std::size_t>(o.channel)];
        if (o.violations.empty()) CHECK(r.rewards[i] == o.qoe);
        shares += o.e_es_share;
      }
      for (int h : held) CHECK(h <= 1);
      CHECK(shares == doctest::Approx(r.es_energy_total).epsilon(1e-12));
    }
  }
}

TEST_CASE("forcing mu = 1 reproduces the semantic-unaware trajectory") {
  EnvConfig c;
  Env a(c, 8), b(c, 8);
  a.reset();
  b.reset();
  Rng rng(6);
  while (!a.done()) {
    std::vector<AgentAction> x, y;
    for (int i = 0; i < c.n_ues; ++i) {
      const AgentAction act = AgentAction::offloading(i, rng.uniform(0.01, 0.09), 1.6e9, 1.0);
      x.push_back(act);
      y.push_back(act);
    }
    const StepResult ra = a.step(x), rb = b.step(y);
    CHECK(ra.rewards == rb.rewards);
  }
}

TEST_CASE("actions are validated") {
  const EnvConfig c;
  CHECK_THROWS(AgentAction::offloading(0, 0.2, 1.6e9, 0.5).validate(c));
  CHECK_THROWS(AgentAction::offloading(0, 0.05, 2.0e9, 0.5).validate(c));
  CHECK_THROWS(AgentAction::offloading(0, 0.05, 1.6e9, 0.05).validate(c));
  CHECK_THROWS(AgentAction::offloading(4, 0.05, 1.6e9, 0.5).validate(c));
  AgentAction local = AgentAction::local(1.6e9);
  local.mu = 0.5;
  CHECK_THROWS(local.validate(c));
}

TEST_CASE("discounted returns") {
  const std::vector<double> r{1, 1};
  CHECK(episode_return(r, 0.0) == r);
  const auto g = episode_return(r, 0.99);
  CHECK(g[0] == doctest::Approx(1.99).epsilon(1e-15));
  CHECK(g[1] == 1.0);
  const std::vector<double> z(5, 0.0);
  CHECK(episode_return(z, 0.9) == z);
  CHECK_THROWS(episode_return(r, 1.0));
}

TEST_CASE("environment agrees with the reference evaluator") {
  EnvConfig c;
  const auto model = EnvModel::build(c);
  Env env(model, 1);
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    env.reset(static_cast<std::uint64_t>(i));
    std::vector<AgentAction> a;
    for (int n = 0; n < c.n_ues; ++n) {
      if (rng.uniform() < 0.25) a.push_back(AgentAction::local(rng.uniform(c.f_min_hz, c.f_max_hz)));
      else
        a.push_back(AgentAction::offloading(static_cast<int>(rng.index(4)), rng.uniform(0.01, 0.09),
                                            rng.uniform(c.f_min_hz, c.f_max_hz),
                                            rng.uniform() < 0.2 ? 1.0 : rng.uniform(0.1, 1.0)));
    }
    const auto ref = reference::evaluate(*model, env.state(), a);
    const StepResult r = evaluate_step(*model, env.state(), a);
    for (std::size_t n = 0; n < a.size(); ++n) {
      CHECK(reference::close(r.outcomes[n].latency, ref[n].latency, 1e-9));
      CHECK(reference::close(r.outcomes[n].energy, ref[n].energy, 1e-9));
      CHECK(reference::close(r.outcomes[n].accuracy, ref[n].accuracy, 1e-9));
      CHECK(reference::close(r.outcomes[n].qoe, ref[n].qoe, 1e-9));
    }
  }
}
