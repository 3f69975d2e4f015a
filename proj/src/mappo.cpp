#include "semmec/mappo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <sstream>
#include <thread>

namespace semmec {

void PpoHyper::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("PpoHyper: ") + what);
  };
  require(gamma >= 0 && gamma < 1, "gamma must lie in [0, 1)");
  require(lambda > 0 && lambda <= 1, "lambda must lie in (0, 1]");
  require(clip_eps > 0, "clip_eps must be positive");
  require(entropy_weight >= 0 && critic_weight >= 0, "loss weights must be non-negative");
  require(epochs >= 1 && minibatches >= 1 && episodes >= 1, "epochs, minibatches, episodes must be >= 1");
  require(minibatch_size >= 0, "minibatch_size must be >= 0");
  require(rollouts_per_update >= 1, "rollouts_per_update must be >= 1");
  require(threads >= 1, "threads must be >= 1");
  require(lr > 0, "lr must be positive");
  require(critic_lr >= 0, "critic_lr must be non-negative");
  require(divergence_window >= 1, "divergence_window must be >= 1");
}

Trajectory collect_episode(const ActorCritic& policy, std::shared_ptr<const EnvModel> model,
                           std::uint64_t env_seed, std::uint64_t sample_seed) {
  const EnvConfig& cfg = model->config;
  const int n = cfg.n_ues;
  const int horizon = cfg.queue_len;
  const FeatureSpec spec = policy.features();
  const bool aware = policy.config.semantic_aware;
  const HeadLayout layout = policy.layout();
  if (n != policy.n_ues || cfg.k_channels != policy.k_channels)
    throw std::invalid_argument("collect_episode: policy was built for another N or K");

  Trajectory tr;
  tr.n_ues = n;
  tr.horizon = horizon;
  const int cols = n * horizon;
  tr.actor_in.resize(spec.actor_size(), cols);
  tr.critic_in.resize(spec.critic_size(n), cols);
  tr.actions.resize(static_cast<std::size_t>(cols));
  tr.log_probs.resize(static_cast<std::size_t>(cols));
  tr.rewards.resize(static_cast<std::size_t>(cols));
  tr.values.resize(static_cast<std::size_t>(cols));
  tr.entropies.resize(static_cast<std::size_t>(cols));
  tr.earned_qoe.resize(static_cast<std::size_t>(cols));

  Env env(model, env_seed);
  Rng rng(sample_seed);
  auto obs = env.reset();
  std::vector<AgentAction> actions(static_cast<std::size_t>(n));
  for (int t = 0; t < horizon; ++t) {
    const Eigen::MatrixXd feats = actor_features(obs, spec);
    Eigen::MatrixXd critic_in(tr.critic_in.rows(), n);
    for (int i = 0; i < n; ++i)
      encode_critic_features(feats,
                             spec.critic_distances ? std::span<const double>(env.state().distances_m)
                                                   : std::span<const double>{},
                             i, t, horizon,
                             std::span<double>(critic_in.col(i).data(), static_cast<std::size_t>(critic_in.rows())));
    const Eigen::MatrixXd heads = policy.actor.forward(feats);
    const Eigen::MatrixXd values = policy.critic.forward(critic_in);
    for (int i = 0; i < n; ++i) {
      const int c = t * n + i;
      const auto uc = static_cast<std::size_t>(c);
      const std::span<const double> head(heads.col(i).data(), static_cast<std::size_t>(heads.rows()));
      const ActionSample a = head_sample(head, policy.log_std, layout, aware, rng);
      tr.actions[uc] = a;
      tr.log_probs[uc] = head_log_prob(head, policy.log_std, layout, a, aware);
      tr.entropies[uc] = head_entropy(head, policy.log_std, layout, aware);
      tr.values[uc] = values(0, i);
      tr.actor_in.col(c) = feats.col(i);
      tr.critic_in.col(c) = critic_in.col(i);
      actions[static_cast<std::size_t>(i)] =
          decode_action(a, policy.bounds, aware, spec.channel_shift(i), cfg.k_channels);
    }
    const StepResult res = env.step(actions);
    for (int i = 0; i < n; ++i) {
      const auto uc = static_cast<std::size_t>(t * n + i);
      tr.rewards[uc] = res.rewards[static_cast<std::size_t>(i)];
      tr.earned_qoe[uc] = earned_qoe(res.outcomes[static_cast<std::size_t>(i)]);
    }
    if (!res.done) obs = env.observations();
  }
  return tr;
}

std::vector<Trajectory> collect_rollouts(const ActorCritic& policy,
                                         std::shared_ptr<const EnvModel> model,
                                         std::span<const RolloutSeed> seeds, int threads) {
  std::vector<Trajectory> out(seeds.size());
  const auto workers = static_cast<std::size_t>(std::max(1, std::min<int>(threads, static_cast<int>(seeds.size()))));
  if (workers == 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i)
      out[i] = collect_episode(policy, model, seeds[i].env, seeds[i].sample);
    return out;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < seeds.size(); i += workers)
            out[i] = collect_episode(policy, model, seeds[i].env, seeds[i].sample);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

std::vector<double> compute_gae(std::span<const double> rewards, std::span<const double> values,
                                double gamma, double lambda) {
  if (values.size() != rewards.size() + 1)
    throw std::invalid_argument("compute_gae: values needs one more entry than rewards");
  std::vector<double> adv(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
  }
  return adv;
}

PpoBatch PpoBatch::select(std::span<const std::size_t> idx) const {
  PpoBatch b;
  b.actor_in.resize(actor_in.rows(), static_cast<Eigen::Index>(idx.size()));
  b.critic_in.resize(critic_in.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    const auto i = idx[j];
    b.actor_in.col(static_cast<Eigen::Index>(j)) = actor_in.col(static_cast<Eigen::Index>(i));
    b.critic_in.col(static_cast<Eigen::Index>(j)) = critic_in.col(static_cast<Eigen::Index>(i));
    b.actions.push_back(actions[i]);
    b.old_log_probs.push_back(old_log_probs[i]);
    b.advantages.push_back(advantages[i]);
    b.returns.push_back(returns[i]);
  }
  return b;
}

void ValueNorm::update(std::span<const double> xs) {
  for (double x : xs) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }
}

double ValueNorm::std() const {
  if (count < 2.0) return 1.0;
  return std::max(std::sqrt(m2 / count), 1e-4);
}

PpoBatch build_batch(std::span<const Trajectory> trajectories, const PpoHyper& hyper,
                     ValueNorm& norm) {
  PpoBatch b;
  std::size_t total = 0;
  for (const auto& tr : trajectories) total += tr.actions.size();
  if (total == 0) throw std::invalid_argument("build_batch: no samples");
  b.actor_in.resize(trajectories.front().actor_in.rows(), static_cast<Eigen::Index>(total));
  b.critic_in.resize(trajectories.front().critic_in.rows(), static_cast<Eigen::Index>(total));
  b.advantages.resize(total);
  b.returns.resize(total);
  Eigen::Index col = 0;
  for (const auto& tr : trajectories) {
    const int n = tr.n_ues;
    const int horizon = tr.horizon;
    const auto cols = static_cast<Eigen::Index>(tr.actions.size());
    b.actor_in.middleCols(col, cols) = tr.actor_in;
    b.critic_in.middleCols(col, cols) = tr.critic_in;
    b.actions.insert(b.actions.end(), tr.actions.begin(), tr.actions.end());
    b.old_log_probs.insert(b.old_log_probs.end(), tr.log_probs.begin(), tr.log_probs.end());
    for (int i = 0; i < n; ++i) {
      std::vector<double> r(static_cast<std::size_t>(horizon));
      std::vector<double> v(static_cast<std::size_t>(horizon) + 1, 0.0);
      for (int t = 0; t < horizon; ++t) {
        const auto c = static_cast<std::size_t>(t * n + i);
        double reward = tr.rewards[c];
        if (hyper.team_reward) {
          reward = 0.0;
          for (int m = 0; m < n; ++m) reward += tr.rewards[static_cast<std::size_t>(t * n + m)];
        }
        r[static_cast<std::size_t>(t)] = reward;
        v[static_cast<std::size_t>(t)] = norm.denormalize(tr.values[c]);
      }
      std::vector<double> adv, ret;
      if (hyper.advantage_estimator == AdvantageEstimator::Gae) {
        adv = compute_gae(r, v, hyper.gamma, hyper.lambda);
        ret = episode_return(r, hyper.gamma);
      } else {
        adv.resize(r.size());
        for (std::size_t t = 0; t < r.size(); ++t) adv[t] = r[t] - v[t];
        ret = r;
      }
      for (int t = 0; t < horizon; ++t) {
        const auto c = static_cast<std::size_t>(col) + static_cast<std::size_t>(t * n + i);
        b.advantages[c] = adv[static_cast<std::size_t>(t)];
        b.returns[c] = ret[static_cast<std::size_t>(t)];
      }
    }
    col += cols;
  }
  norm.update(b.returns);
  for (double& r : b.returns) r = norm.normalize(r);
  if (hyper.normalize_advantages && total > 1) {
    const double mean = std::accumulate(b.advantages.begin(), b.advantages.end(), 0.0) / static_cast<double>(total);
    double ss = 0.0;
    for (double a : b.advantages) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(total));
    for (double& a : b.advantages) a = (a - mean) / (sd + 1e-8);
  }
  return b;
}

double clipped_objective(double ratio, double advantage, double eps) {
  const double g = advantage >= 0 ? (1.0 + eps) * advantage : (1.0 - eps) * advantage;
  return std::min(ratio * advantage, g);
}

PpoLoss ppo_loss(const ActorCritic& theta, const PpoBatch& batch, const PpoHyper& hyper,
                 bool with_gradients) {
  const std::size_t bsz = batch.size();
  if (bsz == 0) throw std::invalid_argument("ppo_loss: empty batch");
  const HeadLayout layout = theta.layout();
  const bool aware = theta.config.semantic_aware;
  const double inv = 1.0 / static_cast<double>(bsz);

  PpoLoss loss;
  loss.ratios.resize(bsz);
  MlpCache actor_cache, critic_cache;
  const Eigen::MatrixXd heads = theta.actor.forward(batch.actor_in, with_gradients ? &actor_cache : nullptr);
  const Eigen::MatrixXd values = theta.critic.forward(batch.critic_in, with_gradients ? &critic_cache : nullptr);

  Eigen::MatrixXd d_heads;
  if (with_gradients) {
    d_heads = Eigen::MatrixXd::Zero(heads.rows(), heads.cols());
    loss.log_std_grad.assign(kContinuousHeads, 0.0);
  }
  std::vector<double> scratch(static_cast<std::size_t>(layout.size()));
  for (std::size_t i = 0; i < bsz; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    const std::span<const double> head(heads.col(c).data(), static_cast<std::size_t>(heads.rows()));
    std::fill(scratch.begin(), scratch.end(), 0.0);
    std::array<double, kContinuousHeads> dls{};
    const double lp = head_log_prob(head, theta.log_std, layout, batch.actions[i], aware,
                                     with_gradients ? std::span<double>(scratch) : std::span<double>{},
                                     with_gradients ? std::span<double>(dls) : std::span<double>{});
    const double ratio = std::exp(lp - batch.old_log_probs[i]);
    if (!std::isfinite(ratio)) {
      std::ostringstream msg;
      msg << "ppo_loss: non-finite importance ratio at sample " << i << " (log-prob " << lp
          << ", sampling log-prob " << batch.old_log_probs[i] << ")";
      throw std::runtime_error(msg.str());
    }
    loss.ratios[i] = ratio;
    const double adv = batch.advantages[i];
    const double obj = clipped_objective(ratio, adv, hyper.clip_eps);
    loss.surrogate += obj * inv;

    if (with_gradients) {
      // d obj / d log-prob is r A on the unclipped branch, zero otherwise
      const double bound = adv >= 0 ? (1.0 + hyper.clip_eps) * adv : (1.0 - hyper.clip_eps) * adv;
      const double w = ratio * adv <= bound ? ratio * adv : 0.0;
      for (std::size_t h = 0; h < scratch.size(); ++h) d_heads(static_cast<Eigen::Index>(h), c) = -inv * w * scratch[h];
      for (int k = 0; k < kContinuousHeads; ++k)
        loss.log_std_grad[static_cast<std::size_t>(k)] += -inv * w * dls[static_cast<std::size_t>(k)];
      std::span<double> dh(d_heads.col(c).data(), static_cast<std::size_t>(heads.rows()));
      loss.entropy += inv * head_entropy(head, theta.log_std, layout, aware, dh, loss.log_std_grad,
                                         -inv * hyper.entropy_weight);
    } else {
      loss.entropy += inv * head_entropy(head, theta.log_std, layout, aware);
    }
  }

  Eigen::MatrixXd d_values(1, static_cast<Eigen::Index>(bsz));
  for (std::size_t i = 0; i < bsz; ++i) {
    const double err = values(0, static_cast<Eigen::Index>(i)) - batch.returns[i];
    loss.critic_loss += inv * err * err;
    d_values(0, static_cast<Eigen::Index>(i)) = hyper.critic_weight * 2.0 * inv * err;
  }
  loss.combined = loss.surrogate - hyper.critic_weight * loss.critic_loss + hyper.entropy_weight * loss.entropy;

  if (with_gradients) {
    loss.actor_grad = theta.actor.backward(actor_cache, d_heads);
    loss.critic_grad = theta.critic.backward(critic_cache, d_values);
  }
  return loss;
}

MappoResult train_mappo(const EnvConfig& env_config, const PolicyConfig& policy_config,
                        const PpoHyper& hyper, std::uint64_t seed,
                        const std::function<void(const TrainLogRow&)>& on_episode) {
  hyper.validate();
  const auto model = EnvModel::build(env_config);
  Rng init_rng(derive_seed(seed, 1));
  MappoResult result{ActorCritic::create(policy_config, env_config, init_rng), {}, {}, {}, {}, {}};
  result.value_norm.enabled = hyper.value_normalization;
  ActorCritic& ac = result.model;
  AdamState actor_opt = AdamState::for_params(ac.actor.param_count(), hyper.lr);
  AdamState log_std_opt = AdamState::for_params(ac.log_std.size(), hyper.lr);
  AdamState critic_opt =
      AdamState::for_params(ac.critic.param_count(), hyper.critic_lr > 0 ? hyper.critic_lr : hyper.lr);
  Rng shuffle_rng(derive_seed(seed, 4));

  int below = 0;
  const auto r = static_cast<std::uint64_t>(hyper.rollouts_per_update);
  for (int ep = 0; ep < hyper.episodes; ++ep) {
    std::vector<RolloutSeed> seeds;
    for (std::uint64_t j = 0; j < r; ++j) {
      const std::uint64_t idx = static_cast<std::uint64_t>(ep) * r + j;
      seeds.push_back({derive_seed(seed, 2, idx), derive_seed(seed, 3, idx)});
    }
    const auto trajectories = collect_rollouts(ac, model, seeds, hyper.threads);

    TrainLogRow row;
    row.episode = ep + 1;
    double samples = 0;
    for (const auto& tr : trajectories) {
      for (std::size_t i = 0; i < tr.rewards.size(); ++i) {
        row.mean_reward += tr.rewards[i];
        row.mean_qoe += tr.earned_qoe[i];
        row.entropy += tr.entropies[i];
      }
      samples += static_cast<double>(tr.rewards.size());
    }
    row.mean_reward /= samples;
    row.mean_qoe /= samples;
    row.entropy /= samples;

    const PpoBatch batch = build_batch(trajectories, hyper, result.value_norm);
    std::vector<std::size_t> order(batch.size());
    int updates = 0;
    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);
      const std::size_t mb =
          hyper.minibatch_size > 0
              ? (order.size() + static_cast<std::size_t>(hyper.minibatch_size) - 1) / static_cast<std::size_t>(hyper.minibatch_size)
              : static_cast<std::size_t>(hyper.minibatches);
      for (std::size_t m = 0; m < mb; ++m) {
        const std::size_t lo = m * order.size() / mb;
        const std::size_t hi = (m + 1) * order.size() / mb;
        if (hi <= lo) continue;
        const PpoBatch minibatch = batch.select(std::span(order).subspan(lo, hi - lo));
        const PpoLoss loss = ppo_loss(ac, minibatch, hyper, true);
        adam_step(actor_opt, ac.actor.mutable_params(), loss.actor_grad);
        adam_step(log_std_opt, ac.log_std, loss.log_std_grad);
        ac.clamp_log_std();
        adam_step(critic_opt, ac.critic.mutable_params(), loss.critic_grad);
        row.critic_loss += loss.critic_loss;
        ++updates;
      }
    }
    if (updates > 0) row.critic_loss /= updates;
    result.log.push_back(row);
    if (on_episode) on_episode(row);

    below = row.mean_reward < hyper.divergence_reward ? below + 1 : 0;
    if (below >= hyper.divergence_window) {
      std::ostringstream msg;
      msg << "MAPPO diverged: mean reward below " << hyper.divergence_reward << " for "
          << hyper.divergence_window << " consecutive episodes (episode " << row.episode
          << ", reward " << row.mean_reward << ", entropy " << row.entropy << ", critic loss "
          << row.critic_loss << ")";
      throw TrainingDiverged(msg.str());
    }
  }
  result.actor_opt = std::move(actor_opt);
  result.log_std_opt = std::move(log_std_opt);
  result.critic_opt = std::move(critic_opt);
  return result;
}

std::vector<AgentAction> MappoPolicy::act(const StepState&, std::span<const Observation> obs) const {
  const FeatureSpec spec = model_.features();
  const Eigen::MatrixXd out = model_.actor.forward(actor_features(obs, spec));
  std::vector<AgentAction> actions;
  actions.reserve(obs.size());
  const HeadLayout layout = model_.layout();
  for (Eigen::Index n = 0; n < out.cols(); ++n) {
    const std::span<const double> head(out.col(n).data(), static_cast<std::size_t>(out.rows()));
    actions.push_back(decode_action(head_mode(head, layout), bounds_, model_.config.semantic_aware,
                                    spec.channel_shift(obs[static_cast<std::size_t>(n)].agent_index),
                                    model_.k_channels));
  }
  return actions;
}

}  // namespace semmec
