#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "semmec/env.hpp"
#include "semmec/stats.hpp"

namespace semmec {

// Decentralised execution: one action per UE from the current state.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::vector<AgentAction> act(const StepState& state,
                                       std::span<const Observation> obs) const = 0;
};

struct EvalMetrics {
  int runs = 0;
  // Across runs, each run contributing its mean over tasks.
  Summary qoe;
  Summary latency;
  Summary energy;
  Summary accuracy;
  Summary reward;
  double offload_fraction = 0;
  double conflict_fraction = 0;
  double violation_fraction = 0;
  std::vector<double> agent_qoe;  // mean earned QoE per UE
  std::vector<double> run_qoe;    // per run, for paired comparisons
};

// Run r resets the environment with derive_seed(seed, r), so two policies
// evaluated with the same seed see identical states.
EvalMetrics evaluate_policy(const Policy& policy, std::shared_ptr<const EnvModel> model, int runs,
                            std::uint64_t seed);

}  // namespace semmec
