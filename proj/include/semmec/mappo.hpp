#pragma once

// MAPPO with a parameter-shared actor and a centralised critic.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "semmec/env.hpp"
#include "semmec/evaluate.hpp"
#include "semmec/policy.hpp"

namespace semmec {

// Gae: generalised advantage estimation over the episode, critic regresses
// discounted returns. Exogenous: the next state does not depend on the
// action, so A(s, a) = r(s, a) - E_a r(s, a) for every gamma; the critic
// regresses the immediate reward and A_t = r_t - V(s_t).
enum class AdvantageEstimator { Gae, Exogenous };

struct PpoHyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_weight = 0.1;  // b2
  double critic_weight = 0.5;   // b1
  int epochs = 5;
  int minibatches = 2;
  int minibatch_size = 2;  // samples per minibatch; 0 falls back to `minibatches`
  int episodes = 300;
  int rollouts_per_update = 4;
  int threads = 1;  // execution only; results do not depend on it
  double lr = 1e-4;
  double critic_lr = 0;  // 0: same as lr
  bool normalize_advantages = true;
  bool team_reward = false;
  AdvantageEstimator advantage_estimator = AdvantageEstimator::Exogenous;
  bool value_normalization = true;
  double divergence_reward = -10.0;
  int divergence_window = 20;

  void validate() const;
};

// One episode; column t * N + n holds agent n at step t.
struct Trajectory {
  int n_ues = 0;
  int horizon = 0;
  Eigen::MatrixXd actor_in;
  Eigen::MatrixXd critic_in;
  std::vector<ActionSample> actions;
  std::vector<double> log_probs;  // under the sampling parameters
  std::vector<double> rewards;
  std::vector<double> values;  // raw critic outputs
  std::vector<double> entropies;
  std::vector<double> earned_qoe;
};

Trajectory collect_episode(const ActorCritic& policy, std::shared_ptr<const EnvModel> model,
                           std::uint64_t env_seed, std::uint64_t sample_seed);

struct RolloutSeed {
  std::uint64_t env;
  std::uint64_t sample;
};

// Runs on up to `threads` workers; output order follows `seeds`.
std::vector<Trajectory> collect_rollouts(const ActorCritic& policy,
                                         std::shared_ptr<const EnvModel> model,
                                         std::span<const RolloutSeed> seeds, int threads);

// `values` has T + 1 entries, the last being the terminal bootstrap.
std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double gamma, double lambda);

struct PpoBatch {
  Eigen::MatrixXd actor_in;
  Eigen::MatrixXd critic_in;
  std::vector<ActionSample> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;

  std::size_t size() const { return actions.size(); }
  PpoBatch select(std::span<const std::size_t> idx) const;
};

// Running statistics of returns; the critic regresses standardised returns.
struct ValueNorm {
  bool enabled = true;
  double count = 0;
  double mean = 0;
  double m2 = 0;

  void update(std::span<const double> xs);
  double std() const;
  double normalize(double x) const { return enabled ? (x - mean) / std() : x; }
  double denormalize(double y) const { return enabled ? y * std() + mean : y; }
};

// Critic outputs are denormalised with `norm` for GAE; the norm then absorbs
// this batch's returns and the stored targets are normalised with it.
PpoBatch build_batch(std::span<const Trajectory> trajectories, const PpoHyper& hyper,
                     ValueNorm& norm);

// min(r A, (1 + eps) A) for A >= 0, min(r A, (1 - eps) A) otherwise.
double clipped_objective(double ratio, double advantage, double eps);

struct PpoLoss {
  double surrogate = 0;
  double critic_loss = 0;
  double entropy = 0;
  double combined = 0;  // surrogate - b1 critic + b2 entropy
  std::vector<double> ratios;
  // Gradients of -combined.
  std::vector<double> actor_grad;
  std::vector<double> log_std_grad;
  std::vector<double> critic_grad;
};

// Throws std::runtime_error when an importance ratio is not finite.
PpoLoss ppo_loss(const ActorCritic& theta, const PpoBatch& batch, const PpoHyper& hyper,
                 bool with_gradients);

struct TrainLogRow {
  int episode = 0;
  double mean_reward = 0;
  double mean_qoe = 0;
  double entropy = 0;
  double critic_loss = 0;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MappoResult {
  ActorCritic model;
  ValueNorm value_norm;
  std::vector<TrainLogRow> log;
  AdamState actor_opt;
  AdamState log_std_opt;
  AdamState critic_opt;
};

MappoResult train_mappo(const EnvConfig& env, const PolicyConfig& policy, const PpoHyper& hyper,
                        std::uint64_t seed,
                        const std::function<void(const TrainLogRow&)>& on_episode = {});

class MappoPolicy : public Policy {
 public:
  explicit MappoPolicy(ActorCritic model) : model_(std::move(model)), bounds_(model_.bounds) {}
  // Decodes onto another configuration's action bounds.
  MappoPolicy(ActorCritic model, const ActionBounds& bounds)
      : model_(std::move(model)), bounds_(bounds) {}

  std::vector<AgentAction> act(const StepState& state,
                               std::span<const Observation> obs) const override;
  const ActorCritic& model() const { return model_; }

 private:
  ActorCritic model_;
  ActionBounds bounds_;
};

}  // namespace semmec
