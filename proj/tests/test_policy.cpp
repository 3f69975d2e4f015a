#include <doctest.h>

#include <cmath>
#include <numbers>

#include "semmec/policy.hpp"

using namespace semmec;

namespace {

double cont_lp(double u, double mean, double log_std) {
  const double z = (u - mean) / std::exp(log_std);
  const double t = std::tanh(u);
  return -0.5 * z * z - log_std - 0.5 * std::log(2 * std::numbers::pi) - std::log(1 - t * t);
}

std::vector<double> random_head(Rng& rng, const HeadLayout& l) {
  std::vector<double> h(static_cast<std::size_t>(l.size()));
  for (auto& v : h) v = rng.normal();
  return h;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("near one-hot logits pick their category with log-prob near zero") {
  const HeadLayout l{4};
  std::vector<double> head{-30, 30, -30, -30, 30, -30, 0.2, -0.1, 0.4};
  const std::vector<double> ls{-1, -1, -1};
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const ActionSample a = head_sample(head, ls, l, true, rng);
    REQUIRE(a.rho == 1);
    REQUIRE(a.channel == 2);
    const double lp = head_log_prob(head, ls, l, a, true);
    const double cont = cont_lp(a.u[0], 0.2, -1) + cont_lp(a.u[1], -0.1, -1) + cont_lp(a.u[2], 0.4, -1);
    CHECK(std::abs(lp - cont) < 1e-12);
  }
}

TEST_CASE("log-std at the floor keeps samples close to the squashed mean") {
  // sigma = e^-5 ~ 6.7e-3 and tanh is 1-Lipschitz, so 3 sigma bounds ~99.7% of deviations.
  const HeadLayout l{4};
  Rng rng(2);
  const std::vector<double> ls{-5, -5, -5};
  const double three_sigma = 3 * std::exp(-5.0);
  int inside = 0, total = 0;
  for (int i = 0; i < 10000; ++i) {
    auto head = random_head(rng, l);
    head[0] = -10;
    head[1] = 10;  // offload so every head is drawn
    const ActionSample a = head_sample(head, ls, l, true, rng);
    for (int c = 0; c < 3; ++c) {
      const double dev = std::abs(std::tanh(a.u[static_cast<std::size_t>(c)]) -
                                  std::tanh(head[static_cast<std::size_t>(l.mean() + c)]));
      inside += dev <= three_sigma;
      ++total;
      CHECK(dev < 6 * std::exp(-5.0));
    }
  }
  CHECK(static_cast<double>(inside) / total >= 0.99);
}

TEST_CASE("categorical probabilities sum to one") {
  const HeadLayout l{4};
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto head = random_head(rng, l);
    const std::vector<double> ls{0.1, -0.3, 0.2};
    ActionSample a;
    a.u = {0.3, -0.2, 0.5};
    double total = 0;
    a.rho = 0;
    total += std::exp(head_log_prob(head, ls, l, a, true) - cont_lp(a.u[1], head[7], ls[1]));
    a.rho = 1;
    for (int k = 0; k < 4; ++k) {
      a.channel = k;
      total += std::exp(head_log_prob(head, ls, l, a, true) - cont_lp(a.u[0], head[6], ls[0]) -
                        cont_lp(a.u[1], head[7], ls[1]) - cont_lp(a.u[2], head[8], ls[2]));
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("Monte-Carlo entropy matches the analytic entropy") {
  const HeadLayout l{4};
  Rng rng(4);
  for (bool aware : {true, false}) {
    const std::vector<double> head{0.2, 0.5, 0.1, -0.4, 0.3, 0.0, 0.6, -0.3, 0.1};
    const std::vector<double> ls{-0.5, 0.3, -1.0};
    double acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc -= head_log_prob(head, ls, l, head_sample(head, ls, l, aware, rng), aware);
    const double h = head_entropy(head, ls, l, aware);
    CHECK(std::abs(acc / n - h) <= 0.01 * std::abs(h));
  }
}

TEST_CASE("squashed Gaussian entropy matches Monte Carlo") {
  Rng rng(5);
  for (double mean : {0.0, 1.2, -2.5})
    for (double ls : {-2.0, 0.0, 1.0}) {
      double acc = 0;
      const int n = 200000;
      for (int i = 0; i < n; ++i) acc -= cont_lp(mean + std::exp(ls) * rng.normal(), mean, ls);
      const double h = squashed_gaussian_entropy(mean, ls).value;
      CHECK(std::abs(acc / n - h) <= 0.01 * std::max(1.0, std::abs(h)));
    }
}

TEST_CASE("squashed samples never leave the action bounds") {
  const EnvConfig cfg;
  const ActionBounds b = ActionBounds::from(cfg);
  const HeadLayout l{4};
  Rng rng(6);
  std::vector<double> head(9, 0.0);
  head[1] = 1;
  const std::vector<double> ls{2, 2, 2};
  for (int i = 0; i < 1000000; ++i) {
    head[6] = rng.normal() * 5;
    const ActionSample s = head_sample(head, ls, l, true, rng);
    const AgentAction a = decode_action(s, b, true, i % 4, 4);
    REQUIRE_NOTHROW(a.validate(cfg));
  }
}

TEST_CASE("log-prob and entropy gradients match finite differences") {
  const HeadLayout l{4};
  Rng rng(7);
  for (bool aware : {true, false})
    for (int t = 0; t < 20; ++t) {
      auto head = random_head(rng, l);
      std::vector<double> ls{0.3 * rng.normal(), 0.3 * rng.normal(), 0.3 * rng.normal()};
      const ActionSample a = head_sample(head, ls, l, aware, rng);
      std::vector<double> dh(head.size(), 0.0), dl(3, 0.0), eh(head.size(), 0.0), el(3, 0.0);
      head_log_prob(head, ls, l, a, aware, dh, dl);
      head_entropy(head, ls, l, aware, eh, el);
      const double h = 1e-6;
      for (std::size_t i = 0; i < head.size(); ++i) {
        auto up = head, down = head;
        up[i] += h;
        down[i] -= h;
        CHECK(rel_err((head_log_prob(up, ls, l, a, aware) - head_log_prob(down, ls, l, a, aware)) / (2 * h), dh[i]) <= 1e-4);
        CHECK(rel_err((head_entropy(up, ls, l, aware) - head_entropy(down, ls, l, aware)) / (2 * h), eh[i]) <= 1e-4);
      }
      for (std::size_t i = 0; i < 3; ++i) {
        auto up = ls, down = ls;
        up[i] += h;
        down[i] -= h;
        CHECK(rel_err((head_log_prob(head, up, l, a, aware) - head_log_prob(head, down, l, a, aware)) / (2 * h), dl[i]) <= 1e-4);
        CHECK(rel_err((head_entropy(head, up, l, aware) - head_entropy(head, down, l, aware)) / (2 * h), el[i]) <= 1e-4);
      }
    }
}

TEST_CASE("log(1 - tanh^2) is stable") {
  for (double u : {0.0, 0.5, -3.0, 10.0}) {
    const double t = std::tanh(u);
    CHECK(log_one_minus_tanh_sq(u) == doctest::Approx(std::log(1 - t * t)).epsilon(1e-9));
  }
  CHECK(std::isfinite(log_one_minus_tanh_sq(400.0)));
  CHECK(log_one_minus_tanh_sq(400.0) == doctest::Approx(2 * (std::numbers::ln2 - 400.0)));
}

TEST_CASE("decode maps onto bounds, channel offsets and mu rules") {
  const EnvConfig cfg;
  const ActionBounds b = ActionBounds::from(cfg);
  ActionSample s;
  s.rho = 1;
  s.channel = 3;
  s.u = {0.0, 0.0, 0.0};
  AgentAction a = decode_action(s, b, true, 2, 4);
  CHECK(a.offload);
  CHECK(a.channel == 1);
  CHECK(a.p_w == doctest::Approx(0.05));
  CHECK(a.f_hz == doctest::Approx(1.6e9));
  CHECK(a.mu == doctest::Approx(0.55));
  CHECK(decode_action(s, b, false, 0, 4).mu == 1.0);
  s.rho = 0;
  a = decode_action(s, b, true, 1, 4);
  CHECK(!a.offload);
  CHECK(a.mu == 1.0);
}

TEST_CASE("relative channel features rotate each agent's gains") {
  const FeatureSpec spec{4, false, true, true};
  Observation o;
  o.gains = {1e-2, 1e-4, 1e-6, 1e-8};
  o.l_u = 2e9;
  o.l_s = 4e9;
  o.agent_index = 5;  // slot 1
  std::vector<double> f(static_cast<std::size_t>(spec.actor_size()));
  encode_actor_features(o, spec, f);
  CHECK(f[0] == doctest::Approx(-2.0));
  CHECK(f[1] == doctest::Approx(-3.0));
  CHECK(f[3] == doctest::Approx(-1.0));
  CHECK(f[4] == doctest::Approx(0.2));
  CHECK(f[5] == doctest::Approx(0.4));
  CHECK(spec.channel_shift(5) == 1);
  const FeatureSpec slot{4, true, false, false};
  CHECK(slot.actor_size() == 10);
  CHECK(slot.critic_size(4) == 41);
}

TEST_CASE("actor-critic json round trip") {
  const EnvConfig cfg;
  Rng rng(8);
  const ActorCritic ac = ActorCritic::create(PolicyConfig{}, cfg, rng);
  const ActorCritic back = actor_critic_from_json(nlohmann::json::parse(actor_critic_to_json(ac).dump()));
  CHECK(std::equal(ac.actor.params().begin(), ac.actor.params().end(), back.actor.params().begin()));
  CHECK(std::equal(ac.critic.params().begin(), ac.critic.params().end(), back.critic.params().begin()));
  CHECK(back.log_std == ac.log_std);
  CHECK(back.config.semantic_aware == ac.config.semantic_aware);
}
