#pragma once

// Stochastic policy heads for the mixed action {rho, channel, p, f, mu}.
// Discrete parts are categorical; p, f and mu are tanh-squashed Gaussians on
// the normalised (-1, 1) scale, mapped affinely onto their bounds on decode.

#include <Eigen/Core>
#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "semmec/env.hpp"
#include "semmec/nn.hpp"
#include "semmec/rng.hpp"

namespace semmec {

enum ContinuousHead { kHeadP = 0, kHeadF = 1, kHeadMu = 2 };
inline constexpr int kContinuousHeads = 3;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Actor output layout: [rho logits (2) | channel logits (K) | means (3)].
struct HeadLayout {
  int k_channels = 0;
  int size() const { return 2 + k_channels + kContinuousHeads; }
  int rho() const { return 0; }
  int channel() const { return 2; }
  int mean() const { return 2 + k_channels; }
};

struct ActionSample {
  int rho = 0;
  int channel = 0;
  std::array<double, kContinuousHeads> u{};  // pre-squash values
  bool operator==(const ActionSample&) const = default;
};

struct ActionBounds {
  std::array<double, kContinuousHeads> lo{};
  std::array<double, kContinuousHeads> hi{};
  static ActionBounds from(const EnvConfig& config);
};

// Gradients are added into d_head / d_log_std scaled by `scale`; pass empty
// spans to skip them.
double head_log_prob(std::span<const double> head, std::span<const double> log_std,
                     const HeadLayout& layout, const ActionSample& a, bool semantic_aware,
                     std::span<double> d_head = {}, std::span<double> d_log_std = {},
                     double scale = 1.0);

// Entropy of the distribution actually sampled: components that cannot
// affect the outcome are weighted by the probability that they are drawn.
double head_entropy(std::span<const double> head, std::span<const double> log_std,
                    const HeadLayout& layout, bool semantic_aware,
                    std::span<double> d_head = {}, std::span<double> d_log_std = {},
                    double scale = 1.0);

ActionSample head_sample(std::span<const double> head, std::span<const double> log_std,
                         const HeadLayout& layout, bool semantic_aware, Rng& rng);
ActionSample head_mode(std::span<const double> head, const HeadLayout& layout);

// The sampled channel is relative to `channel_shift` (mod K).
AgentAction decode_action(const ActionSample& a, const ActionBounds& bounds, bool semantic_aware,
                          int channel_shift = 0, int k_channels = 1);

// log(1 - tanh(u)^2) without cancellation.
double log_one_minus_tanh_sq(double u);

// Entropy of tanh(u), u ~ N(mean, exp(log_std)^2), with its partials.
struct SquashedEntropy {
  double value;
  double d_mean;
  double d_log_std;
};
SquashedEntropy squashed_gaussian_entropy(double mean, double log_std);

// Observation encoding shared by actor and critic. With relative channels
// each agent sees its gains rotated so that index 0 is its own slot channel
// (agent index mod K), and the channel head picks an offset from that slot.
struct FeatureSpec {
  int k_channels = 0;
  bool agent_slot = false;         // append a one-hot of the slot
  bool relative_channels = true;
  bool critic_distances = true;    // critic also sees each UE's distance

  int actor_size() const { return k_channels + 2 + (agent_slot ? k_channels : 0); }
  int critic_size(int n_ues) const { return n_ues * (actor_size() + (critic_distances ? 1 : 0)) + 1; }
  int channel_shift(int agent_index) const { return relative_channels ? agent_index % k_channels : 0; }
};

void encode_actor_features(const Observation& o, const FeatureSpec& spec, std::span<double> out);
Eigen::MatrixXd actor_features(std::span<const Observation> obs, const FeatureSpec& spec);

// Own features first, then the other agents in index order, then t/T.
// `distances_m` is empty unless `critic_distances` is set.
void encode_critic_features(const Eigen::MatrixXd& actor_cols, std::span<const double> distances_m,
                            int agent, int step, int horizon, std::span<double> out);

struct PolicyConfig {
  std::vector<int> hidden{64, 64};
  bool semantic_aware = true;
  bool agent_slot_feature = false;
  bool relative_channels = true;
  bool critic_distances = true;
  double init_log_std = 0.0;
};

struct ActorCritic {
  PolicyConfig config;
  int n_ues = 0;
  int k_channels = 0;
  ActionBounds bounds;
  Mlp actor;
  std::vector<double> log_std;
  Mlp critic;

  static ActorCritic create(const PolicyConfig& config, const EnvConfig& env, Rng& rng);

  HeadLayout layout() const { return {k_channels}; }
  FeatureSpec features() const {
    return {k_channels, config.agent_slot_feature, config.relative_channels, config.critic_distances};
  }
  void clamp_log_std();
};

nlohmann::json actor_critic_to_json(const ActorCritic& ac);
ActorCritic actor_critic_from_json(const nlohmann::json& j);

}  // namespace semmec
