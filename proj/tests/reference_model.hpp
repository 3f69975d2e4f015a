#pragma once

// Second, deliberately naive implementation of the per-step physics and QoE,
// written from the model equations without calling the library's channel,
// compute, accuracy or qoe functions. Used to cross-check evaluate_step.

#include <algorithm>
#include <cmath>
#include <vector>

#include "semmec/env.hpp"

namespace semmec::reference {

struct Metrics {
  bool offloaded = false;
  double latency = 0;
  double energy = 0;
  double accuracy = 0;
  double qoe = 0;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline std::vector<Metrics> evaluate(const EnvModel& model, const StepState& s,
                                     const std::vector<AgentAction>& acts) {
  const EnvConfig& c = model.config;
  const std::size_t n = acts.size();
  const int k = static_cast<int>(s.fading.rows());

  std::vector<int> users(static_cast<std::size_t>(k), 0);
  for (const auto& a : acts)
    if (a.offload) users[static_cast<std::size_t>(a.channel)] += 1;
  std::vector<bool> off(n);
  double server_load = 0;
  for (std::size_t i = 0; i < n; ++i) {
    off[i] = acts[i].offload && users[static_cast<std::size_t>(acts[i].channel)] == 1;
    if (off[i]) server_load += s.tasks[i].server_flops;
  }
  const double c_s = c.es.flops_per_cycle * c.es.cuda_cores * c.es.clock_hz;
  const double t_server = server_load / c_s;
  const double e_server = c.es.energy_coeff * t_server * c.es.clock_hz * c.es.clock_hz * c.es.clock_hz;

  std::vector<Metrics> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentAction& a = acts[i];
    const TaskLoad& task = s.tasks[i];
    Metrics& m = out[i];
    m.offloaded = off[i];
    const double f = a.f_hz;
    const double c_n = c.ue.flops_per_cycle * c.ue.cuda_cores * f;
    const double mu = off[i] ? a.mu : 1.0;

    double t_tx = 0, t_u = 0, t_s = 0, p = 0, snr = 0;
    if (off[i]) {
      const double d = s.distances_m[i] / c.reference_distance_m;
      const double g = s.fading(a.channel, static_cast<Eigen::Index>(i)) * std::pow(d, -c.path_loss_exp);
      p = a.p_w;
      snr = g * p / c.noise_w;
      const double rate = c.bandwidth_hz * std::log2(1.0 + snr);
      t_tx = task.data_bits * std::pow(mu, c.p_exp) / rate;
      t_u = mu == 1.0 ? 0.0 : task.se_flops / (std::pow(mu, c.q_exp) * c_n);
      t_s = t_server;
    } else {
      t_u = task.local_flops / c_n;
    }
    m.latency = t_tx + t_u + t_s;
    const double share = off[i] ? e_server * task.server_flops / server_load : 0.0;
    m.energy = c.ue.energy_coeff * t_u * f * f * f + p * t_tx + share;

    if (off[i]) {
      const AccuracyProfile& pr = model.accuracy.profile(task.type);
      const double db = 10.0 * std::log10(snr);
      double acc = pr.eps_max * (1.0 - pr.mu_shape * std::exp(-pr.mu_scale * mu)) *
                   sigmoid(pr.snr_steepness * (db - pr.snr_midpoint_db));
      // the model keeps accuracy strictly positive with a 1e-12 floor
      m.accuracy = std::clamp(acc, 1e-12, pr.eps_max);
    } else {
      m.accuracy = task.local_accuracy;
    }

    const double f0 = c.ue.clock_hz;
    const double t_l = task.local_flops / (c.ue.flops_per_cycle * c.ue.cuda_cores * f0);
    const double e_l = c.ue.energy_coeff * t_l * f0 * f0 * f0;
    const double lambda = c.qoe.lambda_scale / t_l;
    const double beta = c.qoe.beta_scale / e_l;
    const double eta = c.qoe.eta;
    m.qoe = c.weights.time * sigmoid(lambda * (t_l - m.latency)) +
            c.weights.energy * sigmoid(beta * (e_l - m.energy)) +
            c.weights.accuracy * sigmoid(eta * (m.accuracy - task.local_accuracy));
  }
  return out;
}

inline bool close(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

}  // namespace semmec::reference
