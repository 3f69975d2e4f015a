#include "semmec/qoe.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semmec {

void QoEWeights::validate() const {
  if (time < 0.0 || energy < 0.0 || accuracy < 0.0)
    throw std::invalid_argument("QoE weights must be non-negative");
  if (std::abs(time + energy + accuracy - 1.0) > 1e-9)
    throw std::invalid_argument("QoE weights must sum to 1");
}

QoESteepness QoECalibration::steepness_for(const LocalBaseline& baseline) const {
  return QoESteepness{lambda_scale / baseline.latency, beta_scale / baseline.energy, eta};
}

void QoECalibration::validate() const {
  if (!(lambda_scale > 0.0) || !(beta_scale > 0.0) || !(eta > 0.0))
    throw std::invalid_argument("QoE steepness constants must be positive");
}

double logistic_score(double x, double x0, double k, bool higher_is_better) {
  if (!(k > 0.0)) throw std::invalid_argument("logistic_score: steepness must be positive");
  const double z = higher_is_better ? k * (x - x0) : k * (x0 - x);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double task_qoe(const TaskMetrics& outcome, const LocalBaseline& baseline,
                const QoEWeights& weights, const QoESteepness& steep) {
  weights.validate();
  const double g_t = logistic_score(outcome.latency, baseline.latency, steep.lambda, false);
  const double g_e = logistic_score(outcome.energy, baseline.energy, steep.beta, false);
  const double g_a = logistic_score(outcome.accuracy, baseline.accuracy, steep.eta, true);
  return weights.time * g_t + weights.energy * g_e + weights.accuracy * g_a;
}

double queue_qoe(std::span<const double> per_task_scores) {
  if (per_task_scores.empty()) throw std::invalid_argument("queue_qoe: empty task queue");
  const double sum = std::accumulate(per_task_scores.begin(), per_task_scores.end(), 0.0);
  return sum / static_cast<double>(per_task_scores.size());
}

LocalBaseline local_baseline(const TaskLoad& task, const ComputeProfile& ue) {
  const double c_n = gpu_capability(ue);
  const double t_l = local_compute_latency(false, 1.0, task.local_flops, task.se_flops, 1.0, c_n);
  const double e_l = ue_energy(ue.energy_coeff, t_l, ue.clock_hz, 0.0, 0.0);
  return LocalBaseline{t_l, e_l, task.local_accuracy};
}

}  // namespace semmec
