#include "semmec/policy.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semmec {
namespace {

constexpr int kHermiteNodes = 48;

struct Hermite {
  std::array<double, kHermiteNodes> x{};
  std::array<double, kHermiteNodes> w{};  // already divided by sqrt(pi)
};

// Golub-Welsch on the Hermite Jacobi matrix.
const Hermite& hermite() {
  static const Hermite h = [] {
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(kHermiteNodes, kHermiteNodes);
    for (int i = 1; i < kHermiteNodes; ++i) j(i, i - 1) = j(i - 1, i) = std::sqrt(i / 2.0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(j);
    Hermite out;
    for (int i = 0; i < kHermiteNodes; ++i) {
      out.x[static_cast<std::size_t>(i)] = es.eigenvalues()(i);
      const double v0 = es.eigenvectors()(0, i);
      out.w[static_cast<std::size_t>(i)] = v0 * v0;
    }
    return out;
  }();
  return h;
}

double log_sum_exp(std::span<const double> l) {
  const double m = *std::max_element(l.begin(), l.end());
  double s = 0.0;
  for (double v : l) s += std::exp(v - m);
  return m + std::log(s);
}

void softmax(std::span<const double> l, std::span<double> p) {
  const double lse = log_sum_exp(l);
  for (std::size_t i = 0; i < l.size(); ++i) p[i] = std::exp(l[i] - lse);
}

int argmax(std::span<const double> l) {
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

// log pi(a) and, optionally, scale * d/dlogits added into d.
double categorical_log_prob(std::span<const double> l, int a, std::span<double> d, double scale) {
  const double lse = log_sum_exp(l);
  if (!d.empty())
    for (std::size_t i = 0; i < l.size(); ++i)
      d[i] += scale * ((static_cast<int>(i) == a ? 1.0 : 0.0) - std::exp(l[i] - lse));
  return l[static_cast<std::size_t>(a)] - lse;
}

double categorical_entropy(std::span<const double> l, std::span<double> d, double scale) {
  const double lse = log_sum_exp(l);
  double h = 0.0;
  for (double v : l) h -= std::exp(v - lse) * (v - lse);
  if (!d.empty())
    for (std::size_t i = 0; i < l.size(); ++i) {
      const double lp = l[i] - lse;
      d[i] += scale * (-std::exp(lp) * (lp + h));
    }
  return h;
}

double squashed_log_prob(double u, double mean, double log_std, double* d_mean, double* d_log_std,
                         double scale) {
  const double s = std::exp(log_std);
  const double z = (u - mean) / s;
  if (d_mean) *d_mean += scale * z / s;
  if (d_log_std) *d_log_std += scale * (z * z - 1.0);
  return -0.5 * z * z - log_std - 0.5 * std::log(2.0 * std::numbers::pi) - log_one_minus_tanh_sq(u);
}

double squash01(double u) { return 0.5 * (std::tanh(u) + 1.0); }

void check_head(std::span<const double> head, std::span<const double> log_std, const HeadLayout& layout) {
  if (static_cast<int>(head.size()) != layout.size())
    throw std::invalid_argument("policy head: output size does not match layout");
  if (!log_std.empty() && static_cast<int>(log_std.size()) != kContinuousHeads)
    throw std::invalid_argument("policy head: expected one log-std per continuous head");
}

}  // namespace

double log_one_minus_tanh_sq(double u) {
  const double a = std::abs(u);
  return 2.0 * (std::numbers::ln2 - a - std::log1p(std::exp(-2.0 * a)));
}

SquashedEntropy squashed_gaussian_entropy(double mean, double log_std) {
  const Hermite& h = hermite();
  const double s = std::exp(log_std);
  SquashedEntropy e{0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + log_std, 0.0, 1.0};
  for (int i = 0; i < kHermiteNodes; ++i) {
    const double x = std::numbers::sqrt2 * h.x[static_cast<std::size_t>(i)];
    const double w = h.w[static_cast<std::size_t>(i)];
    const double u = mean + s * x;
    const double dl = -2.0 * std::tanh(u);
    e.value += w * log_one_minus_tanh_sq(u);
    e.d_mean += w * dl;
    e.d_log_std += w * dl * s * x;
  }
  return e;
}

ActionBounds ActionBounds::from(const EnvConfig& c) {
  ActionBounds b;
  b.lo = {c.p_min_w, c.f_min_hz, c.mu_min};
  b.hi = {c.p_max_w, c.f_max_hz, 1.0};
  return b;
}

double head_log_prob(std::span<const double> head, std::span<const double> log_std,
                     const HeadLayout& layout, const ActionSample& a, bool aware,
                     std::span<double> d_head, std::span<double> d_log_std, double scale) {
  check_head(head, log_std, layout);
  const bool grads = !d_head.empty();
  const int k = layout.k_channels;
  auto sub = [&](std::span<double> s, int off, int n) {
    return grads ? s.subspan(static_cast<std::size_t>(off), static_cast<std::size_t>(n)) : std::span<double>{};
  };
  auto cont = [&](int c) {
    const auto mi = static_cast<std::size_t>(layout.mean() + c);
    return squashed_log_prob(a.u[static_cast<std::size_t>(c)], head[mi], log_std[static_cast<std::size_t>(c)],
                             grads ? &d_head[mi] : nullptr,
                             grads ? &d_log_std[static_cast<std::size_t>(c)] : nullptr, scale);
  };

  double lp = categorical_log_prob(head.subspan(0, 2), a.rho, sub(d_head, layout.rho(), 2), scale);
  lp += cont(kHeadF);
  if (a.rho == 1) {
    lp += categorical_log_prob(head.subspan(static_cast<std::size_t>(layout.channel()), static_cast<std::size_t>(k)),
                               a.channel, sub(d_head, layout.channel(), k), scale);
    lp += cont(kHeadP);
    if (aware) lp += cont(kHeadMu);
  }
  return lp;
}

double head_entropy(std::span<const double> head, std::span<const double> log_std,
                    const HeadLayout& layout, bool aware, std::span<double> d_head,
                    std::span<double> d_log_std, double scale) {
  check_head(head, log_std, layout);
  const bool grads = !d_head.empty();
  const int k = layout.k_channels;
  const auto rho_l = head.subspan(0, 2);
  const double lse = log_sum_exp(rho_l);
  const double p1 = std::exp(rho_l[1] - lse);

  auto cont = [&](int c) {
    return squashed_gaussian_entropy(head[static_cast<std::size_t>(layout.mean() + c)],
                                     log_std[static_cast<std::size_t>(c)]);
  };
  const SquashedEntropy hf = cont(kHeadF);
  const SquashedEntropy hp = cont(kHeadP);
  const SquashedEntropy hmu = cont(kHeadMu);
  const auto ch_l = head.subspan(static_cast<std::size_t>(layout.channel()), static_cast<std::size_t>(k));
  const double h_ch = categorical_entropy(ch_l, {}, 0.0);
  const double offload_part = h_ch + hp.value + (aware ? hmu.value : 0.0);

  double h = categorical_entropy(rho_l, {}, 0.0) + hf.value + p1 * offload_part;
  if (grads) {
    categorical_entropy(rho_l, d_head.subspan(0, 2), scale);
    // d p1 / d l_j = p1 (delta_1j - p_j)
    const double p0 = 1.0 - p1;
    d_head[0] += scale * offload_part * (-p1 * p0);
    d_head[1] += scale * offload_part * (p1 * p0);
    categorical_entropy(ch_l, d_head.subspan(static_cast<std::size_t>(layout.channel()), static_cast<std::size_t>(k)),
                        scale * p1);
    auto add = [&](int c, const SquashedEntropy& e, double w) {
      d_head[static_cast<std::size_t>(layout.mean() + c)] += scale * w * e.d_mean;
      d_log_std[static_cast<std::size_t>(c)] += scale * w * e.d_log_std;
    };
    add(kHeadF, hf, 1.0);
    add(kHeadP, hp, p1);
    if (aware) add(kHeadMu, hmu, p1);
  }
  return h;
}

ActionSample head_sample(std::span<const double> head, std::span<const double> log_std,
                         const HeadLayout& layout, bool aware, Rng& rng) {
  check_head(head, log_std, layout);
  const int k = layout.k_channels;
  ActionSample a;
  std::array<double, 2> p_rho{};
  softmax(head.subspan(0, 2), p_rho);
  a.rho = static_cast<int>(rng.categorical(p_rho));
  auto draw = [&](int c) {
    a.u[static_cast<std::size_t>(c)] = head[static_cast<std::size_t>(layout.mean() + c)] +
                                       std::exp(log_std[static_cast<std::size_t>(c)]) * rng.normal();
  };
  draw(kHeadF);
  if (a.rho == 1) {
    std::vector<double> p_ch(static_cast<std::size_t>(k));
    softmax(head.subspan(static_cast<std::size_t>(layout.channel()), static_cast<std::size_t>(k)), p_ch);
    a.channel = static_cast<int>(rng.categorical(p_ch));
    draw(kHeadP);
    if (aware) draw(kHeadMu);
  }
  return a;
}

ActionSample head_mode(std::span<const double> head, const HeadLayout& layout) {
  if (static_cast<int>(head.size()) != layout.size())
    throw std::invalid_argument("policy head: output size does not match layout");
  ActionSample a;
  a.rho = argmax(head.subspan(0, 2));
  a.channel = argmax(head.subspan(static_cast<std::size_t>(layout.channel()),
                                  static_cast<std::size_t>(layout.k_channels)));
  for (int c = 0; c < kContinuousHeads; ++c)
    a.u[static_cast<std::size_t>(c)] = head[static_cast<std::size_t>(layout.mean() + c)];
  return a;
}

AgentAction decode_action(const ActionSample& a, const ActionBounds& b, bool aware, int channel_shift,
                          int k_channels) {
  auto value = [&](int c) {
    const auto i = static_cast<std::size_t>(c);
    return std::clamp(b.lo[i] + (b.hi[i] - b.lo[i]) * squash01(a.u[i]), b.lo[i], b.hi[i]);
  };
  const double f = value(kHeadF);
  if (a.rho == 0) return AgentAction::local(f);
  const int channel = channel_shift == 0 ? a.channel : (a.channel + channel_shift) % k_channels;
  return AgentAction::offloading(channel, value(kHeadP), f, aware ? value(kHeadMu) : 1.0);
}

void encode_actor_features(const Observation& o, const FeatureSpec& spec, std::span<double> out) {
  const int k = spec.k_channels;
  if (static_cast<int>(o.gains.size()) != k)
    throw std::invalid_argument("actor features: observation has wrong channel count");
  if (static_cast<int>(out.size()) != spec.actor_size())
    throw std::invalid_argument("actor features: output buffer has wrong size");
  const int shift = spec.channel_shift(o.agent_index);
  std::size_t i = 0;
  for (int c = 0; c < k; ++c)
    out[i++] = std::log10(std::max(o.gains[static_cast<std::size_t>((c + shift) % k)], 1e-30)) / 2.0;
  out[i++] = o.l_u / 1e10;
  out[i++] = o.l_s / 1e10;
  if (spec.agent_slot)
    for (int s = 0; s < k; ++s) out[i++] = (o.agent_index % k) == s ? 1.0 : 0.0;
}

Eigen::MatrixXd actor_features(std::span<const Observation> obs, const FeatureSpec& spec) {
  const int f = spec.actor_size();
  Eigen::MatrixXd m(f, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t n = 0; n < obs.size(); ++n)
    encode_actor_features(obs[n], spec,
                          std::span<double>(m.col(static_cast<Eigen::Index>(n)).data(), static_cast<std::size_t>(f)));
  return m;
}

void encode_critic_features(const Eigen::MatrixXd& cols, std::span<const double> distances_m,
                            int agent, int step, int horizon, std::span<double> out) {
  const auto f = static_cast<std::size_t>(cols.rows());
  const auto n = static_cast<int>(cols.cols());
  const bool with_d = !distances_m.empty();
  if (with_d && static_cast<int>(distances_m.size()) != n)
    throw std::invalid_argument("critic features: one distance per agent required");
  if (out.size() != (f + (with_d ? 1 : 0)) * static_cast<std::size_t>(n) + 1)
    throw std::invalid_argument("critic features: output buffer has wrong size");
  std::size_t i = 0;
  auto put = [&](int a) {
    for (std::size_t r = 0; r < f; ++r) out[i++] = cols(static_cast<Eigen::Index>(r), a);
    if (with_d) out[i++] = std::log10(distances_m[static_cast<std::size_t>(a)] / 100.0);
  };
  put(agent);
  for (int a = 0; a < n; ++a)
    if (a != agent) put(a);
  out[i] = static_cast<double>(step) / static_cast<double>(horizon);
}

ActorCritic ActorCritic::create(const PolicyConfig& config, const EnvConfig& env, Rng& rng) {
  const FeatureSpec spec{env.k_channels, config.agent_slot_feature, config.relative_channels,
                         config.critic_distances};
  const int fa = spec.actor_size();
  const int fc = spec.critic_size(env.n_ues);
  std::vector<int> actor_sizes{fa};
  std::vector<int> critic_sizes{fc};
  for (int h : config.hidden) {
    actor_sizes.push_back(h);
    critic_sizes.push_back(h);
  }
  actor_sizes.push_back(HeadLayout{env.k_channels}.size());
  critic_sizes.push_back(1);
  ActorCritic ac{config,
                 env.n_ues,
                 env.k_channels,
                 ActionBounds::from(env),
                 Mlp(actor_sizes),
                 std::vector<double>(kContinuousHeads, config.init_log_std),
                 Mlp(critic_sizes)};
  ac.actor.init(rng, std::numbers::sqrt2, 0.01);
  ac.critic.init(rng, std::numbers::sqrt2, 1.0);
  ac.clamp_log_std();
  return ac;
}

void ActorCritic::clamp_log_std() {
  for (double& v : log_std) v = std::clamp(v, kLogStdMin, kLogStdMax);
}

nlohmann::json actor_critic_to_json(const ActorCritic& ac) {
  return {{"hidden", ac.config.hidden},
          {"semantic_aware", ac.config.semantic_aware},
          {"agent_slot_feature", ac.config.agent_slot_feature},
          {"relative_channels", ac.config.relative_channels},
          {"critic_distances", ac.config.critic_distances},
          {"init_log_std", ac.config.init_log_std},
          {"n_ues", ac.n_ues},
          {"k_channels", ac.k_channels},
          {"bounds_lo", ac.bounds.lo},
          {"bounds_hi", ac.bounds.hi},
          {"actor", mlp_to_json(ac.actor)},
          {"log_std", ac.log_std},
          {"critic", mlp_to_json(ac.critic)}};
}

ActorCritic actor_critic_from_json(const nlohmann::json& j) {
  PolicyConfig cfg;
  cfg.hidden = j.at("hidden").get<std::vector<int>>();
  cfg.semantic_aware = j.at("semantic_aware").get<bool>();
  cfg.agent_slot_feature = j.at("agent_slot_feature").get<bool>();
  cfg.relative_channels = j.at("relative_channels").get<bool>();
  cfg.critic_distances = j.at("critic_distances").get<bool>();
  cfg.init_log_std = j.at("init_log_std").get<double>();
  ActionBounds b;
  b.lo = j.at("bounds_lo").get<std::array<double, kContinuousHeads>>();
  b.hi = j.at("bounds_hi").get<std::array<double, kContinuousHeads>>();
  ActorCritic ac{cfg,
                 j.at("n_ues").get<int>(),
                 j.at("k_channels").get<int>(),
                 b,
                 mlp_from_json(j.at("actor")),
                 j.at("log_std").get<std::vector<double>>(),
                 mlp_from_json(j.at("critic"))};
  if (static_cast<int>(ac.log_std.size()) != kContinuousHeads)
    throw std::invalid_argument("checkpoint: log_std must have one entry per continuous head");
  if (ac.actor.shape().output_size() != ac.layout().size() ||
      ac.actor.shape().input_size() != ac.features().actor_size())
    throw std::invalid_argument("checkpoint: actor shape does not match the recorded K");
  return ac;
}

}  // namespace semmec
