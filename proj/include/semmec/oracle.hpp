#pragma once

// Reference solutions and baseline policies: exhaustive search over the
// discrete action grid on a frozen decision epoch, the local-only policy and
// the semantic-unaware wrapper.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include <json.hpp>

#include "semmec/d3qn.hpp"
#include "semmec/env.hpp"
#include "semmec/evaluate.hpp"

namespace semmec {

// One decision epoch with every random quantity fixed.
struct FrozenInstance {
  EnvConfig config;
  StepState state;

  // Draws the first epoch of an episode seeded with `seed`.
  static FrozenInstance sample(const EnvConfig& config, std::uint64_t seed);
};

nlohmann::json frozen_instance_to_json(const FrozenInstance& inst);
FrozenInstance frozen_instance_from_json(const nlohmann::json& j);
FrozenInstance load_frozen_instance(const std::filesystem::path& path);
void save_frozen_instance(const FrozenInstance& inst, const std::filesystem::path& path);

// Feasible: offloaders hold distinct channels and no task violates the
// latency, energy or accuracy limits.
bool feasible(const StepResult& result);

// Sum of earned QoE over the UEs.
double total_qoe(const StepResult& result);

struct OracleResult {
  std::vector<AgentAction> actions;
  std::vector<std::size_t> indices;  // per-UE grid indices
  double total_qoe = 0;
  std::uint64_t joint_index = 0;
  std::uint64_t enumerated = 0;
  std::uint64_t feasible_count = 0;
};

inline constexpr int kOracleMaxUes = 3;
inline constexpr std::uint64_t kOracleMaxJoint = 10'000'000;

// Exhaustive maximisation of total QoE over table^N. Joint index is
// sum_n idx_n * |table|^n; ties go to the lowest joint index. Shards over the
// first UE's index run on `threads` workers and reduce in shard order, so the
// result does not depend on the thread count. Throws std::invalid_argument
// with the enumeration size for instances beyond the guard.
OracleResult brute_force_best(const FrozenInstance& inst, const DiscreteActionTable& table,
                              int threads = 1);

// rho = 0 at the fixed local frequency ue.clock_hz.
class LocalPolicy : public Policy {
 public:
  explicit LocalPolicy(const EnvConfig& config) : f_hz_(config.ue.clock_hz) {}
  std::vector<AgentAction> act(const StepState& state,
                               std::span<const Observation> obs) const override;

 private:
  double f_hz_;
};

// Delegates to `inner` and transmits raw data (mu = 1).
class SemanticUnawarePolicy : public Policy {
 public:
  explicit SemanticUnawarePolicy(std::shared_ptr<const Policy> inner) : inner_(std::move(inner)) {}
  std::vector<AgentAction> act(const StepState& state,
                               std::span<const Observation> obs) const override;

 private:
  std::shared_ptr<const Policy> inner_;
};

// Draws uniformly from `table` per UE until a feasible joint action appears;
// returns the best total QoE over `samples` feasible draws.
double best_random_feasible(const FrozenInstance& inst, const DiscreteActionTable& table,
                            int samples, Rng& rng);

}  // namespace semmec
