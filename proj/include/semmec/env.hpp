#pragma once

// Multi-agent episodic offloading environment: each of N UEs works through a
// queue of Q tasks, one task per step, choosing a joint action
// {rho, p, f, mu, channel} per task.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semmec/accuracy.hpp"
#include "semmec/channel.hpp"
#include "semmec/compute.hpp"
#include "semmec/qoe.hpp"
#include "semmec/rng.hpp"

namespace semmec {

enum class ViolationMode { Sum, First };

struct TaskSpec {
  double data_bits = 0;
  double local_flops = 0;
  double se_flops = 0;
  double server_flops = 0;
  double accuracy_target = 0.9;            // offloaded accuracy at mu = 1, high SNR
  std::optional<double> local_accuracy;    // default: target + margin
};

struct EnvConfig {
  int n_ues = 4;
  int k_channels = 4;
  int queue_len = 20;
  double bandwidth_hz = 10e6;
  double noise_w = 2e-3;
  double p_min_w = 0.010;
  double p_max_w = 0.090;
  double mu_min = 0.1;
  double f_min_hz = 1.5e9;
  double f_max_hz = 1.7e9;
  // ue.clock_hz is the fixed local frequency used for the QoE baseline.
  ComputeProfile ue{1280, 1.6e9, 2.0, 1e-26};
  ComputeProfile es{65536, 2.2e9, 2.0, 1.2e-26};
  double t_max_s = 5e-3;
  double e_max_j = 0.15;
  double eps_min = 0.5;
  double p_exp = 1.0;
  double q_exp = 1.0;
  QoEWeights weights;
  QoECalibration qoe;
  std::array<double, kTaskTypeCount> task_mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::array<TaskSpec, kTaskTypeCount> tasks{{
      {8e3, 1e9, 8e7, 6e8, 0.92, std::nullopt},
      {1e5, 6e9, 3e8, 4e9, 0.88, std::nullopt},
      {2.4e5, 1.2e10, 6e8, 8e9, 0.70, std::nullopt},
  }};
  AccuracyShape accuracy_shape;
  double local_accuracy_margin = 0.01;
  std::string accuracy_table;  // optional CSV; replaces the parametric profiles
  double distance_min_m = 50.0;
  double distance_max_m = 200.0;
  double reference_distance_m = 100.0;
  double path_loss_exp = 3.0;
  double conflict_penalty = 0.1;
  ViolationMode violation_mode = ViolationMode::Sum;
  EsEnergyAttribution es_energy_attribution = EsEnergyAttribution::Proportional;
  std::uint64_t seed = 1;

  void validate() const;
};

// Everything derived from an EnvConfig that stays fixed for a run.
struct EnvModel {
  EnvConfig config;
  AccuracyModel accuracy;
  std::array<TaskLoad, kTaskTypeCount> loads;
  std::array<LocalBaseline, kTaskTypeCount> baselines;
  std::array<QoESteepness, kTaskTypeCount> steepness;
  double es_capability = 0;

  static std::shared_ptr<const EnvModel> build(const EnvConfig& config);

  const TaskLoad& load(TaskType t) const { return loads[static_cast<std::size_t>(t)]; }
  const LocalBaseline& baseline(TaskType t) const {
    return baselines[static_cast<std::size_t>(t)];
  }
};

struct Observation {
  std::vector<double> gains;  // |g_{k,n}|^2 over the K sub-channels
  double l_u = 0;
  double l_s = 0;
  int agent_index = 0;
};

struct AgentAction {
  bool offload = false;
  double p_w = 0.010;
  double f_hz = 1.6e9;
  double mu = 1.0;
  int channel = 0;

  static AgentAction local(double f_hz);
  static AgentAction offloading(int channel, double p_w, double f_hz, double mu);

  // Throws std::invalid_argument on out-of-range fields.
  void validate(const EnvConfig& config) const;

  bool operator==(const AgentAction&) const = default;
};

enum class Constraint { Latency, Energy, Accuracy, ChannelConflict, Unreachable };

struct Violation {
  Constraint constraint;
  double margin;  // negative when violated
};

struct TaskOutcome {
  TaskType type = TaskType::Text;
  bool requested_offload = false;
  bool offloaded = false;
  bool conflict = false;
  bool unreachable = false;
  int channel = -1;
  double mu = 1.0;
  double p_w = 0;
  double f_hz = 0;
  double rate_bps = 0;
  double snr = 0;
  double t_tx = 0;
  double t_u = 0;
  double t_s = 0;
  double latency = 0;
  double e_ue = 0;
  double e_es_share = 0;
  double energy = 0;
  double accuracy = 0;
  double qoe = 0;
  std::vector<Violation> violations;
};

// QoE credited to a task: zero when a latency, energy or accuracy
// constraint is violated. Conflicts only cost reward (the task ran locally).
double earned_qoe(const TaskOutcome& outcome);

struct StepResult {
  std::vector<double> rewards;
  std::vector<TaskOutcome> outcomes;
  double es_energy_total = 0;
  bool done = false;
};

// One decision epoch with all randomness drawn.
struct StepState {
  Eigen::MatrixXd fading;  // K x N, |h|^2
  Eigen::MatrixXd gains;   // K x N, |g|^2
  std::vector<double> distances_m;
  std::vector<TaskLoad> tasks;  // current task per UE
};

Eigen::MatrixXd gains_from_fading(const Eigen::MatrixXd& fading,
                                  std::span<const double> distances_m,
                                  const EnvConfig& config);

// Each violated constraint with its signed margin.
std::vector<Violation> check_constraints(const TaskOutcome& outcome, const EnvConfig& config);

// Scores a joint action on a fixed state; pure.
StepResult evaluate_step(const EnvModel& model, const StepState& state,
                         std::span<const AgentAction> actions);

std::vector<Observation> observe(const StepState& state);

// R_t = sum_{t'>=t} gamma^(t'-t) r_t'.
std::vector<double> episode_return(std::span<const double> rewards, double gamma);

class Env {
 public:
  Env(std::shared_ptr<const EnvModel> model, std::uint64_t seed);
  Env(const EnvConfig& config, std::uint64_t seed);

  std::vector<Observation> reset();
  std::vector<Observation> reset(std::uint64_t seed);
  StepResult step(std::span<const AgentAction> actions);

  bool done() const { return step_ >= model_->config.queue_len; }
  int step_index() const { return step_; }
  const StepState& state() const { return state_; }
  const EnvModel& model() const { return *model_; }
  const EnvConfig& config() const { return model_->config; }
  std::vector<Observation> observations() const { return observe(state_); }

 private:
  void draw_fading();

  std::shared_ptr<const EnvModel> model_;
  Rng rng_;
  StepState state_;
  std::vector<std::vector<TaskType>> queues_;
  int step_ = 0;
  bool started_ = false;
};

}  // namespace semmec
