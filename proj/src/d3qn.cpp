#include "semmec/d3qn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace semmec {
namespace {

std::size_t grid_index(const std::vector<double>& grid, double v, const char* what) {
  const auto it = std::find(grid.begin(), grid.end(), v);
  if (it == grid.end())
    throw std::invalid_argument(std::string("DiscreteActionTable::encode: ") + what + " not on the grid");
  return static_cast<std::size_t>(it - grid.begin());
}

Eigen::MatrixXd stack_obs(std::span<const Transition* const> batch, bool next) {
  const auto f = static_cast<Eigen::Index>(batch.front()->obs.size());
  Eigen::MatrixXd m(f, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& v = next ? batch[i]->next_obs : batch[i]->obs;
    m.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(v.data(), f);
  }
  return m;
}

double epsilon_greedy_entropy(double eps, std::size_t actions) {
  const double a = static_cast<double>(actions);
  const double p_other = eps / a;
  const double p_greedy = 1.0 - eps + p_other;
  double h = -p_greedy * std::log(p_greedy);
  if (p_other > 0) h -= (a - 1.0) * p_other * std::log(p_other);
  return h;
}

AgentAction absolute(AgentAction a, int shift, int k) {
  if (a.offload) a.channel = (a.channel + shift) % k;
  return a;
}

}  // namespace

std::vector<double> linspace(double lo, double hi, int points) {
  if (points < 1) throw std::invalid_argument("linspace: need at least one point");
  if (points == 1) return {hi};
  std::vector<double> v(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    v[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (points - 1);
  v.back() = hi;
  return v;
}

DiscreteActionTable DiscreteActionTable::build(const EnvConfig& c, bool aware, int p_points,
                                               int f_points, int mu_points) {
  c.validate();
  DiscreteActionTable t;
  t.p_ = linspace(c.p_min_w, c.p_max_w, p_points);
  t.f_ = linspace(c.f_min_hz, c.f_max_hz, f_points);
  t.mu_ = aware ? linspace(c.mu_min, 1.0, mu_points) : std::vector<double>{1.0};
  t.k_ = c.k_channels;
  for (double f : t.f_) t.actions_.push_back(AgentAction::local(f));
  for (int ch = 0; ch < t.k_; ++ch)
    for (double p : t.p_)
      for (double f : t.f_)
        for (double mu : t.mu_) t.actions_.push_back(AgentAction::offloading(ch, p, f, mu));
  return t;
}

std::size_t DiscreteActionTable::encode(const AgentAction& a) const {
  const std::size_t fi = grid_index(f_, a.f_hz, "f");
  if (!a.offload) return fi;
  if (a.channel < 0 || a.channel >= k_)
    throw std::invalid_argument("DiscreteActionTable::encode: channel out of range");
  const std::size_t pi = grid_index(p_, a.p_w, "p");
  const std::size_t mi = grid_index(mu_, a.mu, "mu");
  return f_.size() + ((static_cast<std::size_t>(a.channel) * p_.size() + pi) * f_.size() + fi) * mu_.size() + mi;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1u << 16));
}

void ReplayBuffer::push(Transition t) {
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
  } else {
    items_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch, Rng& rng) const {
  if (items_.empty()) throw std::logic_error("ReplayBuffer::sample: buffer is empty");
  std::vector<const Transition*> out(batch);
  for (auto& p : out) p = &items_[rng.index(items_.size())];
  return out;
}

Eigen::MatrixXd dueling_q(const Eigen::MatrixXd& out) {
  const Eigen::Index a = out.rows() - 1;
  if (a < 1) throw std::invalid_argument("dueling_q: need a value row and at least one advantage row");
  Eigen::MatrixXd q = out.bottomRows(a);
  const Eigen::RowVectorXd shift = out.row(0) - q.colwise().mean();
  q.rowwise() += shift;
  return q;
}

void D3qnHyper::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("D3qnHyper: ") + what);
  };
  require(episodes >= 1, "episodes must be >= 1");
  require(gamma >= 0 && gamma < 1, "gamma must lie in [0, 1)");
  require(lr > 0, "lr must be positive");
  require(batch >= 1 && buffer >= 1 && target_sync >= 1, "batch, buffer, target_sync must be >= 1");
  require(eps_start >= 0 && eps_start <= 1 && eps_end >= 0 && eps_end <= 1, "epsilon must lie in [0, 1]");
  require(eps_decay_fraction > 0 && eps_decay_fraction <= 1, "eps_decay_fraction must lie in (0, 1]");
  require(learn_start >= 0 && updates_per_step >= 1, "learn_start >= 0 and updates_per_step >= 1");
  require(divergence_window >= 1, "divergence_window must be >= 1");
}

double D3qnHyper::epsilon(int episode) const {
  const double horizon = eps_decay_fraction * episodes;
  const double x = std::min(1.0, static_cast<double>(episode) / horizon);
  return eps_start + (eps_end - eps_start) * x;
}

std::vector<double> double_dqn_targets(const Mlp& online, const Mlp& target,
                                       std::span<const Transition* const> batch, double gamma) {
  const Eigen::MatrixXd next = stack_obs(batch, true);
  const Eigen::MatrixXd q_online = dueling_q(online.forward(next));
  const Eigen::MatrixXd q_target = dueling_q(target.forward(next));
  std::vector<double> y(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    Eigen::Index best = 0;
    q_online.col(c).maxCoeff(&best);
    y[i] = batch[i]->reward + (batch[i]->done ? 0.0 : gamma * q_target(best, c));
  }
  return y;
}

QUpdate q_loss(const Mlp& online, std::span<const Transition* const> batch,
               std::span<const double> targets) {
  if (batch.empty() || batch.size() != targets.size())
    throw std::invalid_argument("q_loss: batch and targets must be non-empty and aligned");
  MlpCache cache;
  const Eigen::MatrixXd out = online.forward(stack_obs(batch, false), &cache);
  const Eigen::MatrixXd q = dueling_q(out);
  const double inv = 1.0 / static_cast<double>(batch.size());
  const double inv_a = 1.0 / static_cast<double>(q.rows());
  Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  QUpdate u;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const auto a = static_cast<Eigen::Index>(batch[i]->action);
    const double err = q(a, c) - targets[i];
    u.loss += inv * err * err;
    const double g = 2.0 * inv * err;
    d_out(0, c) = g;
    d_out.col(c).tail(q.rows()).array() -= g * inv_a;
    d_out(a + 1, c) += g;
  }
  u.grad = online.backward(cache, d_out);
  return u;
}

D3qnResult train_d3qn(const EnvConfig& env_config, const FeatureSpec& features, bool aware,
                      const D3qnHyper& hyper, std::uint64_t seed,
                      const std::function<void(const TrainLogRow&)>& on_episode) {
  hyper.validate();
  if (features.k_channels != env_config.k_channels)
    throw std::invalid_argument("train_d3qn: feature layout K differs from the environment");
  const auto model = EnvModel::build(env_config);
  const int n = env_config.n_ues;
  const int k = env_config.k_channels;
  DiscreteActionTable table = DiscreteActionTable::build(env_config, aware);
  std::vector<int> sizes{features.actor_size()};
  sizes.insert(sizes.end(), hyper.hidden.begin(), hyper.hidden.end());
  sizes.push_back(static_cast<int>(table.size()) + 1);

  D3qnResult result{QNetwork{features, table, aware, Mlp(sizes)}, {}, {}};
  Mlp& online = result.model.net;
  Rng init_rng(derive_seed(seed, 1));
  online.init(init_rng, std::numbers::sqrt2, 1.0);
  Mlp target = online;
  AdamState opt = AdamState::for_params(online.param_count(), hyper.lr);
  ReplayBuffer buffer(hyper.buffer);
  Rng explore(derive_seed(seed, 5));
  Rng replay(derive_seed(seed, 6));
  const auto batch_size = static_cast<std::size_t>(hyper.batch);
  std::int64_t grad_steps = 0;
  int below = 0;

  Env env(model, seed);
  std::vector<AgentAction> actions(static_cast<std::size_t>(n));
  std::vector<std::size_t> chosen(static_cast<std::size_t>(n));
  for (int ep = 0; ep < hyper.episodes; ++ep) {
    const double eps = hyper.epsilon(ep);
    auto obs = env.reset(derive_seed(seed, 2, static_cast<std::uint64_t>(ep)));
    Eigen::MatrixXd feats = actor_features(obs, features);
    TrainLogRow row;
    row.episode = ep + 1;
    double samples = 0, loss_sum = 0, loss_count = 0;
    while (!env.done()) {
      const Eigen::MatrixXd q = dueling_q(online.forward(feats));
      for (int i = 0; i < n; ++i) {
        std::size_t a;
        if (explore.uniform() < eps) {
          a = explore.index(table.size());
        } else {
          Eigen::Index best = 0;
          q.col(i).maxCoeff(&best);
          a = static_cast<std::size_t>(best);
        }
        chosen[static_cast<std::size_t>(i)] = a;
        actions[static_cast<std::size_t>(i)] = absolute(table.decode(a), features.channel_shift(i), k);
      }
      const StepResult res = env.step(actions);
      Eigen::MatrixXd next_feats = feats;
      if (!res.done) next_feats = actor_features(env.observations(), features);
      for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        Transition t;
        t.obs.assign(feats.col(i).data(), feats.col(i).data() + feats.rows());
        t.next_obs.assign(next_feats.col(i).data(), next_feats.col(i).data() + next_feats.rows());
        t.action = chosen[ui];
        t.reward = res.rewards[ui];
        t.done = res.done;
        buffer.push(std::move(t));
        row.mean_reward += res.rewards[ui];
        row.mean_qoe += earned_qoe(res.outcomes[ui]);
        samples += 1;
      }
      feats = std::move(next_feats);

      if (buffer.size() >= std::max<std::size_t>(batch_size, static_cast<std::size_t>(hyper.learn_start))) {
        for (int u = 0; u < hyper.updates_per_step; ++u) {
          const auto batch = buffer.sample(batch_size, replay);
          const auto y = double_dqn_targets(online, target, batch, hyper.gamma);
          const QUpdate upd = q_loss(online, batch, y);
          adam_step(opt, online.mutable_params(), upd.grad);
          loss_sum += upd.loss;
          loss_count += 1;
          if (++grad_steps % hyper.target_sync == 0) target.set_params(online.params());
        }
      }
    }
    row.mean_reward /= samples;
    row.mean_qoe /= samples;
    row.entropy = epsilon_greedy_entropy(eps, table.size());
    row.critic_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    result.log.push_back(row);
    if (on_episode) on_episode(row);

    below = row.mean_reward < hyper.divergence_reward ? below + 1 : 0;
    if (below >= hyper.divergence_window) {
      std::ostringstream msg;
      msg << "D3QN diverged: mean reward below " << hyper.divergence_reward << " for "
          << hyper.divergence_window << " consecutive episodes (episode " << row.episode
          << ", reward " << row.mean_reward << ", TD loss " << row.critic_loss << ")";
      throw TrainingDiverged(msg.str());
    }
  }
  result.opt = std::move(opt);
  return result;
}

std::vector<AgentAction> D3qnPolicy::act(const StepState&, std::span<const Observation> obs) const {
  const Eigen::MatrixXd q = dueling_q(model_.net.forward(actor_features(obs, model_.features)));
  std::vector<AgentAction> actions;
  actions.reserve(obs.size());
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    Eigen::Index best = 0;
    q.col(i).maxCoeff(&best);
    actions.push_back(absolute(model_.table.decode(static_cast<std::size_t>(best)),
                               model_.features.channel_shift(obs[static_cast<std::size_t>(i)].agent_index),
                               model_.table.k_channels()));
  }
  return actions;
}

nlohmann::json qnetwork_to_json(const QNetwork& q) {
  return {{"k_channels", q.features.k_channels},
          {"agent_slot_feature", q.features.agent_slot},
          {"relative_channels", q.features.relative_channels},
          {"semantic_aware", q.semantic_aware},
          {"p_points", q.table.p_grid().size()},
          {"f_points", q.table.f_grid().size()},
          {"mu_points", q.table.mu_grid().size()},
          {"net", mlp_to_json(q.net)}};
}

QNetwork qnetwork_from_json(const nlohmann::json& j, const EnvConfig& env) {
  FeatureSpec spec{j.at("k_channels").get<int>(), j.at("agent_slot_feature").get<bool>(),
                   j.at("relative_channels").get<bool>()};
  const bool aware = j.at("semantic_aware").get<bool>();
  if (spec.k_channels != env.k_channels)
    throw std::invalid_argument("D3QN checkpoint: K differs from the environment");
  auto table = DiscreteActionTable::build(env, aware, j.at("p_points").get<int>(),
                                          j.at("f_points").get<int>(), aware ? j.at("mu_points").get<int>() : 1);
  Mlp net = mlp_from_json(j.at("net"));
  if (net.shape().input_size() != spec.actor_size() ||
      net.shape().output_size() != static_cast<int>(table.size()) + 1)
    throw std::invalid_argument("D3QN checkpoint: network shape does not match the action table");
  return QNetwork{spec, std::move(table), aware, std::move(net)};
}

}  // namespace semmec
