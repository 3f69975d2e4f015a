#include "semmec/env.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semmec {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("EnvConfig: " + what);
}

bool within(double x, double lo, double hi) {
  const double tol = 1e-12 * std::max(std::abs(lo), std::abs(hi));
  return x >= lo - tol && x <= hi + tol;
}

}  // namespace

void EnvConfig::validate() const {
  require(n_ues >= 1, "n_ues must be >= 1");
  require(k_channels >= 1, "k_channels must be >= 1");
  require(queue_len >= 1, "queue_len must be >= 1");
  require(bandwidth_hz > 0, "bandwidth must be positive");
  require(noise_w > 0, "noise power must be positive");
  require(p_min_w >= 0 && p_max_w > 0 && p_min_w <= p_max_w, "transmit power range invalid");
  require(mu_min > 0 && mu_min <= 1, "mu_min must lie in (0, 1]");
  require(f_min_hz > 0 && f_min_hz <= f_max_hz, "local frequency range invalid");
  ue.validate();
  es.validate();
  require(within(ue.clock_hz, f_min_hz, f_max_hz), "ue.clock_hz must lie in the frequency range");
  require(t_max_s > 0, "t_max must be positive");
  require(e_max_j > 0, "e_max must be positive");
  require(eps_min >= 0 && eps_min < 1, "eps_min must lie in [0, 1)");
  require(p_exp > 0 && q_exp > 0, "p_exp and q_exp must be positive");
  weights.validate();
  qoe.validate();
  double mix = 0;
  for (double m : task_mix) {
    require(m >= 0, "task mix probabilities must be non-negative");
    mix += m;
  }
  require(std::abs(mix - 1.0) < 1e-9, "task mix must sum to 1");
  for (const auto& t : tasks) {
    require(t.data_bits > 0 && t.local_flops > 0 && t.se_flops > 0 && t.server_flops > 0,
            "task loads must be positive");
    require(t.accuracy_target > 0 && t.accuracy_target < 1, "accuracy target must lie in (0, 1)");
    if (t.local_accuracy) require(*t.local_accuracy > 0 && *t.local_accuracy <= 1,
                                  "local accuracy must lie in (0, 1]");
  }
  require(local_accuracy_margin >= 0, "local accuracy margin must be non-negative");
  require(distance_min_m > 0 && distance_min_m <= distance_max_m, "distance range invalid");
  require(reference_distance_m > 0, "reference distance must be positive");
  require(path_loss_exp >= 0, "path-loss exponent must be non-negative");
  require(conflict_penalty >= 0, "conflict penalty must be non-negative");
}

std::shared_ptr<const EnvModel> EnvModel::build(const EnvConfig& config) {
  config.validate();
  std::array<double, kTaskTypeCount> targets{};
  for (std::size_t i = 0; i < kTaskTypeCount; ++i) targets[i] = config.tasks[i].accuracy_target;
  const auto calibrated =
      calibrate_profiles(targets, config.accuracy_shape, config.local_accuracy_margin);

  std::array<AccuracyProfile, kTaskTypeCount> profiles{};
  for (std::size_t i = 0; i < kTaskTypeCount; ++i) profiles[i] = calibrated[i].profile;
  AccuracyModel accuracy = config.accuracy_table.empty()
                               ? AccuracyModel(profiles)
                               : load_accuracy_table(config.accuracy_table);

  auto model = std::shared_ptr<EnvModel>(new EnvModel{config, std::move(accuracy), {}, {}, {}, 0});
  for (std::size_t i = 0; i < kTaskTypeCount; ++i) {
    const auto& spec = config.tasks[i];
    TaskLoad load;
    load.type = static_cast<TaskType>(i);
    load.data_bits = spec.data_bits;
    load.local_flops = spec.local_flops;
    load.se_flops = spec.se_flops;
    load.server_flops = spec.server_flops;
    load.local_accuracy = spec.local_accuracy.value_or(calibrated[i].local_accuracy);
    load.validate();
    model->loads[i] = load;
    model->baselines[i] = local_baseline(load, config.ue);
    model->steepness[i] = config.qoe.steepness_for(model->baselines[i]);
  }
  model->es_capability = gpu_capability(config.es);
  return model;
}

AgentAction AgentAction::local(double f_hz) {
  AgentAction a;
  a.offload = false;
  a.f_hz = f_hz;
  a.mu = 1.0;
  return a;
}

AgentAction AgentAction::offloading(int channel, double p_w, double f_hz, double mu) {
  return AgentAction{true, p_w, f_hz, mu, channel};
}

void AgentAction::validate(const EnvConfig& config) const {
  if (!within(p_w, config.p_min_w, config.p_max_w))
    throw std::invalid_argument("AgentAction: transmit power outside range");
  if (!within(f_hz, config.f_min_hz, config.f_max_hz))
    throw std::invalid_argument("AgentAction: local frequency outside range");
  if (!within(mu, config.mu_min, 1.0))
    throw std::invalid_argument("AgentAction: mu outside [mu_min, 1]");
  if (channel < 0 || channel >= config.k_channels)
    throw std::invalid_argument("AgentAction: channel index outside 0..K-1");
  if (!offload && mu != 1.0)
    throw std::invalid_argument("AgentAction: local execution requires mu = 1");
}

Eigen::MatrixXd gains_from_fading(const Eigen::MatrixXd& fading,
                                  std::span<const double> distances_m,
                                  const EnvConfig& config) {
  Eigen::MatrixXd gains(fading.rows(), fading.cols());
  for (Eigen::Index n = 0; n < fading.cols(); ++n) {
    const double d = distances_m[static_cast<std::size_t>(n)] / config.reference_distance_m;
    for (Eigen::Index k = 0; k < fading.rows(); ++k)
      gains(k, n) = channel_gain(fading(k, n), d, config.path_loss_exp);
  }
  return gains;
}

std::vector<Violation> check_constraints(const TaskOutcome& outcome, const EnvConfig& config) {
  std::vector<Violation> v;
  if (outcome.latency > config.t_max_s)
    v.push_back({Constraint::Latency, config.t_max_s - outcome.latency});
  if (outcome.energy > config.e_max_j)
    v.push_back({Constraint::Energy, config.e_max_j - outcome.energy});
  if (outcome.accuracy < config.eps_min)
    v.push_back({Constraint::Accuracy, outcome.accuracy - config.eps_min});
  return v;
}

StepResult evaluate_step(const EnvModel& model, const StepState& state,
                         std::span<const AgentAction> actions) {
  const EnvConfig& cfg = model.config;
  const int n_ues = static_cast<int>(state.tasks.size());
  const int k_channels = static_cast<int>(state.gains.rows());
  if (static_cast<int>(actions.size()) != n_ues)
    throw std::invalid_argument("evaluate_step: one action per UE required");
  for (const auto& a : actions) a.validate(cfg);

  // channel claims among offloaders; every claimant of a shared channel fails
  std::vector<int> claims(static_cast<std::size_t>(k_channels), 0);
  for (const auto& a : actions)
    if (a.offload) ++claims[static_cast<std::size_t>(a.channel)];

  StepResult result;
  result.outcomes.resize(static_cast<std::size_t>(n_ues));
  ChannelAssignment assignment(k_channels, n_ues);
  std::vector<double> server_flops(static_cast<std::size_t>(n_ues), 0.0);
  for (int n = 0; n < n_ues; ++n) {
    const auto& a = actions[static_cast<std::size_t>(n)];
    auto& out = result.outcomes[static_cast<std::size_t>(n)];
    out.type = state.tasks[static_cast<std::size_t>(n)].type;
    out.requested_offload = a.offload;
    if (!a.offload) continue;
    if (claims[static_cast<std::size_t>(a.channel)] > 1) {
      out.conflict = true;
    } else if (!(state.gains(a.channel, n) * a.p_w > 0.0)) {
      out.unreachable = true;
    } else {
      out.offloaded = true;
      out.channel = a.channel;
      assignment.assign(a.channel, n);
      server_flops[static_cast<std::size_t>(n)] = state.tasks[static_cast<std::size_t>(n)].server_flops;
    }
  }

  std::vector<double> offloaded_flops;
  for (double f : server_flops)
    if (f > 0.0) offloaded_flops.push_back(f);
  const double t_s = server_latency(offloaded_flops, model.es_capability);
  const double e_s = es_energy(cfg.es.energy_coeff, t_s, cfg.es.clock_hz);
  const auto es_share = attribute_es_energy(e_s, server_flops, cfg.es_energy_attribution);
  result.es_energy_total = e_s;

  result.rewards.resize(static_cast<std::size_t>(n_ues));
  for (int n = 0; n < n_ues; ++n) {
    const auto un = static_cast<std::size_t>(n);
    const auto& a = actions[un];
    const auto& task = state.tasks[un];
    auto& out = result.outcomes[un];
    const bool off = out.offloaded;
    out.mu = off ? a.mu : 1.0;
    out.p_w = off ? a.p_w : 0.0;
    out.f_hz = a.f_hz;

    const double c_n = gpu_capability(cfg.ue.flops_per_cycle, cfg.ue.cuda_cores, a.f_hz);
    if (off) {
      const std::vector<double> col = assignment.column(n);
      std::vector<double> gains_col(static_cast<std::size_t>(k_channels));
      for (int k = 0; k < k_channels; ++k) gains_col[static_cast<std::size_t>(k)] = state.gains(k, n);
      out.rate_bps = offload_rate(col, gains_col, a.p_w, cfg.bandwidth_hz, cfg.noise_w);
      out.snr = state.gains(a.channel, n) * a.p_w / cfg.noise_w;
    }
    out.t_tx = transmission_latency(off, task.data_bits, out.mu, cfg.p_exp, out.rate_bps);
    out.t_u = local_compute_latency(off, out.mu, task.local_flops, task.se_flops, cfg.q_exp, c_n);
    out.t_s = off ? t_s : 0.0;
    out.latency = task_latency(off, out.t_tx, out.t_u, out.t_s);
    out.e_ue = ue_energy(cfg.ue.energy_coeff, out.t_u, a.f_hz, out.p_w, out.t_tx);
    out.e_es_share = es_share[un];
    out.energy = task_energy(out.e_ue, out.e_es_share);
    out.accuracy = task_accuracy(model.accuracy, task.type, out.mu, out.snr, off,
                                 task.local_accuracy, cfg.mu_min);
    out.qoe = task_qoe({out.latency, out.energy, out.accuracy}, model.baseline(task.type),
                       cfg.weights, model.steepness[static_cast<std::size_t>(task.type)]);

    out.violations = check_constraints(out, cfg);
    double reward = out.qoe;
    if (!out.violations.empty()) {
      if (cfg.violation_mode == ViolationMode::First) {
        reward = out.violations.front().margin;
      } else {
        reward = 0.0;
        for (const auto& v : out.violations) reward += v.margin;
      }
    }
    if (out.conflict || out.unreachable) {
      out.violations.push_back({out.conflict ? Constraint::ChannelConflict : Constraint::Unreachable,
                                -cfg.conflict_penalty});
      reward -= cfg.conflict_penalty;
    }
    result.rewards[un] = reward;
  }
  return result;
}

double earned_qoe(const TaskOutcome& outcome) {
  for (const auto& v : outcome.violations)
    if (v.constraint == Constraint::Latency || v.constraint == Constraint::Energy ||
        v.constraint == Constraint::Accuracy)
      return 0.0;
  return outcome.qoe;
}

std::vector<Observation> observe(const StepState& state) {
  const auto n_ues = static_cast<int>(state.tasks.size());
  std::vector<Observation> obs(static_cast<std::size_t>(n_ues));
  for (int n = 0; n < n_ues; ++n) {
    auto& o = obs[static_cast<std::size_t>(n)];
    o.gains.resize(static_cast<std::size_t>(state.gains.rows()));
    for (Eigen::Index k = 0; k < state.gains.rows(); ++k)
      o.gains[static_cast<std::size_t>(k)] = state.gains(k, n);
    o.l_u = state.tasks[static_cast<std::size_t>(n)].local_flops;
    o.l_s = state.tasks[static_cast<std::size_t>(n)].server_flops;
    o.agent_index = n;
  }
  return obs;
}

std::vector<double> episode_return(std::span<const double> rewards, double gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw std::invalid_argument("episode_return: gamma must lie in [0, 1)");
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

Env::Env(std::shared_ptr<const EnvModel> model, std::uint64_t seed)
    : model_(std::move(model)), rng_(seed) {}

Env::Env(const EnvConfig& config, std::uint64_t seed) : Env(EnvModel::build(config), seed) {}

std::vector<Observation> Env::reset(std::uint64_t seed) {
  rng_ = Rng(seed);
  return reset();
}

std::vector<Observation> Env::reset() {
  const EnvConfig& cfg = model_->config;
  const auto n = static_cast<std::size_t>(cfg.n_ues);
  state_.distances_m.assign(n, 0.0);
  for (auto& d : state_.distances_m) d = rng_.uniform(cfg.distance_min_m, cfg.distance_max_m);
  queues_.assign(n, {});
  for (auto& q : queues_) {
    q.resize(static_cast<std::size_t>(cfg.queue_len));
    for (auto& t : q) t = static_cast<TaskType>(rng_.categorical(cfg.task_mix));
  }
  step_ = 0;
  started_ = true;
  state_.tasks.assign(n, TaskLoad{});
  for (std::size_t i = 0; i < n; ++i) state_.tasks[i] = model_->load(queues_[i][0]);
  draw_fading();
  return observe(state_);
}

void Env::draw_fading() {
  const EnvConfig& cfg = model_->config;
  state_.fading = sample_fading(rng_, cfg.k_channels, cfg.n_ues);
  state_.gains = gains_from_fading(state_.fading, state_.distances_m, cfg);
}

StepResult Env::step(std::span<const AgentAction> actions) {
  if (!started_) throw std::logic_error("Env::step: call reset() first");
  if (done()) throw std::logic_error("Env::step: episode already finished");
  StepResult result = evaluate_step(*model_, state_, actions);
  ++step_;
  result.done = done();
  if (!result.done) {
    for (std::size_t i = 0; i < queues_.size(); ++i)
      state_.tasks[i] = model_->load(queues_[i][static_cast<std::size_t>(step_)]);
    draw_fading();
  }
  return result;
}

}  // namespace semmec
