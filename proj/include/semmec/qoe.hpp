#pragma once

// Unified QoE: logistic scores of latency, energy and accuracy centred on the
// local-execution values, so a locally executed task scores exactly 0.5.

#include <span>

#include "semmec/compute.hpp"

namespace semmec {

struct QoEWeights {
  double time = 1.0 / 3.0;
  double energy = 1.0 / 3.0;
  double accuracy = 1.0 / 3.0;

  void validate() const;
};

struct QoESteepness {
  double lambda = 1.0;  // per second
  double beta = 1.0;    // per joule
  double eta = 12.0;    // per unit accuracy
};

// Offsets x0 of the three scores.
struct LocalBaseline {
  double latency = 0;
  double energy = 0;
  double accuracy = 0;
};

struct TaskMetrics {
  double latency = 0;
  double energy = 0;
  double accuracy = 0;
};

// lambda = lambda_scale / t_l and beta = beta_scale / E_l per task.
struct QoECalibration {
  double lambda_scale = 3.0;
  double beta_scale = 3.0;
  double eta = 12.0;

  QoESteepness steepness_for(const LocalBaseline& baseline) const;
  void validate() const;
};

double logistic_score(double x, double x0, double k, bool higher_is_better);

double task_qoe(const TaskMetrics& outcome, const LocalBaseline& baseline,
                const QoEWeights& weights, const QoESteepness& steep);

double queue_qoe(std::span<const double> per_task_scores);

// t_l = l^U / c_n and E_l = kappa^U t_l f^3 at the profile's fixed clock.
LocalBaseline local_baseline(const TaskLoad& task, const ComputeProfile& ue);

}  // namespace semmec
