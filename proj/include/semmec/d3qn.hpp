#pragma once

// Dueling double DQN over a discretised action grid, one network shared by
// all agents (independent learners).

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "semmec/env.hpp"
#include "semmec/evaluate.hpp"
#include "semmec/mappo.hpp"
#include "semmec/nn.hpp"
#include "semmec/policy.hpp"

namespace semmec {

// Local entries come first (one per f point, p/mu/channel canonical), then
// offload entries ordered by channel, p, f, mu.
class DiscreteActionTable {
 public:
  static DiscreteActionTable build(const EnvConfig& config, bool semantic_aware,
                                   int p_points = 5, int f_points = 3, int mu_points = 10);

  std::size_t size() const { return actions_.size(); }
  const AgentAction& decode(std::size_t index) const { return actions_.at(index); }
  // Throws std::invalid_argument for actions off the grid.
  std::size_t encode(const AgentAction& action) const;

  const std::vector<double>& p_grid() const { return p_; }
  const std::vector<double>& f_grid() const { return f_; }
  const std::vector<double>& mu_grid() const { return mu_; }
  int k_channels() const { return k_; }

 private:
  std::vector<double> p_, f_, mu_;
  int k_ = 0;
  std::vector<AgentAction> actions_;
};

std::vector<double> linspace(double lo, double hi, int points);

struct Transition {
  std::vector<double> obs;
  std::size_t action = 0;
  double reward = 0;
  std::vector<double> next_obs;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  // Uniform with replacement.
  std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Transition> items_;
};

// Network output is [V | A_1..A_|A|]; Q = V + A - mean(A).
Eigen::MatrixXd dueling_q(const Eigen::MatrixXd& net_out);

struct D3qnHyper {
  int episodes = 1500;
  double gamma = 0.0;  // transitions are exogenous; see README
  double lr = 1e-4;
  int batch = 32;
  std::size_t buffer = 30000;
  int target_sync = 200;  // gradient steps
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;
  int learn_start = 32;
  int updates_per_step = 1;
  std::vector<int> hidden{64, 64};
  double divergence_reward = -10.0;
  int divergence_window = 20;

  void validate() const;
  double epsilon(int episode) const;
};

struct QNetwork {
  FeatureSpec features;
  DiscreteActionTable table;
  bool semantic_aware = true;
  Mlp net;
};

// Double-DQN targets y = r + gamma Q_target(o', argmax_a Q_online(o', a)) (1 - done).
std::vector<double> double_dqn_targets(const Mlp& online, const Mlp& target,
                                       std::span<const Transition* const> batch, double gamma);

struct QUpdate {
  double loss = 0;  // mean squared TD error
  std::vector<double> grad;
};

QUpdate q_loss(const Mlp& online, std::span<const Transition* const> batch,
               std::span<const double> targets);

struct D3qnResult {
  QNetwork model;
  std::vector<TrainLogRow> log;  // entropy column holds the epsilon-greedy entropy
  AdamState opt;
};

D3qnResult train_d3qn(const EnvConfig& env, const FeatureSpec& features, bool semantic_aware,
                      const D3qnHyper& hyper, std::uint64_t seed,
                      const std::function<void(const TrainLogRow&)>& on_episode = {});

class D3qnPolicy : public Policy {
 public:
  explicit D3qnPolicy(QNetwork model) : model_(std::move(model)) {}
  std::vector<AgentAction> act(const StepState& state,
                               std::span<const Observation> obs) const override;
  const QNetwork& model() const { return model_; }

 private:
  QNetwork model_;
};

nlohmann::json qnetwork_to_json(const QNetwork& q);
QNetwork qnetwork_from_json(const nlohmann::json& j, const EnvConfig& env);

}  // namespace semmec
