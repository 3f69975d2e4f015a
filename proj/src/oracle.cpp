#include "semmec/oracle.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "semmec/config.hpp"

namespace semmec {

using nlohmann::json;

FrozenInstance FrozenInstance::sample(const EnvConfig& config, std::uint64_t seed) {
  Env env(config, seed);
  env.reset();
  return {config, env.state()};
}

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw std::invalid_argument("frozen instance: fading must be K x N");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("frozen instance: fading must be K x N");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

}  // namespace

json frozen_instance_to_json(const FrozenInstance& inst) {
  json tasks = json::array();
  for (const auto& t : inst.state.tasks)
    tasks.push_back({{"type", std::string(to_string(t.type))},
                     {"data_bits", t.data_bits},
                     {"local_flops", t.local_flops},
                     {"se_flops", t.se_flops},
                     {"server_flops", t.server_flops},
                     {"local_accuracy", t.local_accuracy}});
  return {{"format", "semmec-instance"},
          {"version", 1},
          {"config", env_config_to_json(inst.config)},
          {"fading", matrix_json(inst.state.fading)},
          {"distances_m", inst.state.distances_m},
          {"tasks", tasks}};
}

FrozenInstance frozen_instance_from_json(const json& j) {
  if (j.value("format", "") != "semmec-instance" || j.value("version", 0) != 1)
    throw std::invalid_argument("frozen instance: unsupported format");
  FrozenInstance inst;
  inst.config = env_config_from_json(j.at("config"), "config");
  const auto k = static_cast<Eigen::Index>(inst.config.k_channels);
  const auto n = static_cast<Eigen::Index>(inst.config.n_ues);
  inst.state.fading = matrix_from_json(j.at("fading"), k, n);
  inst.state.distances_m = j.at("distances_m").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(inst.state.distances_m.size()) != n)
    throw std::invalid_argument("frozen instance: one distance per UE required");
  inst.state.gains = gains_from_fading(inst.state.fading, inst.state.distances_m, inst.config);
  const json& tasks = j.at("tasks");
  if (static_cast<Eigen::Index>(tasks.size()) != n)
    throw std::invalid_argument("frozen instance: one task per UE required");
  for (const json& t : tasks) {
    TaskLoad load;
    load.type = task_type_from_string(t.at("type").get<std::string>());
    load.data_bits = t.at("data_bits").get<double>();
    load.local_flops = t.at("local_flops").get<double>();
    load.se_flops = t.at("se_flops").get<double>();
    load.server_flops = t.at("server_flops").get<double>();
    load.local_accuracy = t.at("local_accuracy").get<double>();
    load.validate();
    inst.state.tasks.push_back(load);
  }
  return inst;
}

FrozenInstance load_frozen_instance(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    return frozen_instance_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void save_frozen_instance(const FrozenInstance& inst, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << frozen_instance_to_json(inst).dump(2) << '\n';
}

bool feasible(const StepResult& result) {
  for (const auto& o : result.outcomes)
    if (!o.violations.empty()) return false;
  return true;
}

double total_qoe(const StepResult& result) {
  double s = 0;
  for (const auto& o : result.outcomes) s += earned_qoe(o);
  return s;
}

namespace {

struct ShardBest {
  double value = -std::numeric_limits<double>::infinity();
  std::uint64_t index = 0;
  std::uint64_t feasible = 0;
  bool found = false;

  void offer(double v, std::uint64_t idx) {
    if (!found || v > value || (v == value && idx < index)) {
      value = v;
      index = idx;
      found = true;
    }
  }
};

// Offloaders on a shared channel make the joint action infeasible; skip
// them before scoring.
bool channels_distinct(std::span<const AgentAction> actions) {
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!actions[i].offload) continue;
    for (std::size_t j = i + 1; j < actions.size(); ++j)
      if (actions[j].offload && actions[j].channel == actions[i].channel) return false;
  }
  return true;
}

}  // namespace

OracleResult brute_force_best(const FrozenInstance& inst, const DiscreteActionTable& table,
                              int threads) {
  const int n = static_cast<int>(inst.state.tasks.size());
  const std::uint64_t a = table.size();
  if (n < 1) throw std::invalid_argument("brute_force_best: instance has no UEs");
  long double joint = 1;
  for (int i = 0; i < n; ++i) joint *= static_cast<long double>(a);
  if (n > kOracleMaxUes || joint > static_cast<long double>(kOracleMaxJoint)) {
    std::ostringstream os;
    os << "brute_force_best: " << n << " UEs x " << a << " actions = " << static_cast<double>(joint)
       << " joint actions exceeds the limit (N <= " << kOracleMaxUes << ", <= " << kOracleMaxJoint
       << ")";
    throw std::invalid_argument(os.str());
  }
  const auto total = static_cast<std::uint64_t>(joint);
  const std::uint64_t rest = total / a;  // joint actions per shard
  const auto model = EnvModel::build(inst.config);

  std::vector<ShardBest> shards(a);
  auto run_shard = [&](std::uint64_t i0) {
    ShardBest best;
    std::vector<AgentAction> actions(static_cast<std::size_t>(n));
    actions[0] = table.decode(i0);
    for (std::uint64_t r = 0; r < rest; ++r) {
      std::uint64_t code = r;
      for (int u = 1; u < n; ++u) {
        actions[static_cast<std::size_t>(u)] = table.decode(code % a);
        code /= a;
      }
      if (!channels_distinct(actions)) continue;
      const StepResult res = evaluate_step(*model, inst.state, actions);
      if (!feasible(res)) continue;
      ++best.feasible;
      best.offer(total_qoe(res), i0 + a * r);
    }
    shards[i0] = best;
  };

  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(a)));
  if (workers == 1) {
    for (std::uint64_t i0 = 0; i0 < a; ++i0) run_shard(i0);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::uint64_t i0 = static_cast<std::uint64_t>(w); i0 < a;
               i0 += static_cast<std::uint64_t>(workers))
            run_shard(i0);
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    pool.clear();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  ShardBest best;
  std::uint64_t feasible_count = 0;
  for (const auto& s : shards) {
    feasible_count += s.feasible;
    if (s.found) best.offer(s.value, s.index);
  }
  if (!best.found) throw std::runtime_error("brute_force_best: no feasible joint action");

  OracleResult out;
  out.total_qoe = best.value;
  out.joint_index = best.index;
  out.enumerated = total;
  out.feasible_count = feasible_count;
  std::uint64_t code = best.index;
  for (int u = 0; u < n; ++u) {
    out.indices.push_back(code % a);
    out.actions.push_back(table.decode(code % a));
    code /= a;
  }
  return out;
}

std::vector<AgentAction> LocalPolicy::act(const StepState&, std::span<const Observation> obs) const {
  return std::vector<AgentAction>(obs.size(), AgentAction::local(f_hz_));
}

std::vector<AgentAction> SemanticUnawarePolicy::act(const StepState& state,
                                                    std::span<const Observation> obs) const {
  auto actions = inner_->act(state, obs);
  for (auto& a : actions)
    if (a.offload) a.mu = 1.0;
  return actions;
}

double best_random_feasible(const FrozenInstance& inst, const DiscreteActionTable& table,
                            int samples, Rng& rng) {
  const auto model = EnvModel::build(inst.config);
  const std::size_t n = inst.state.tasks.size();
  std::vector<AgentAction> actions(n);
  double best = -std::numeric_limits<double>::infinity();
  int found = 0;
  const long long max_draws = 1000LL * samples;
  for (long long d = 0; d < max_draws && found < samples; ++d) {
    for (auto& a : actions) a = table.decode(rng.index(table.size()));
    if (!channels_distinct(actions)) continue;
    const StepResult res = evaluate_step(*model, inst.state, actions);
    if (!feasible(res)) continue;
    ++found;
    best = std::max(best, total_qoe(res));
  }
  return best;
}

}  // namespace semmec
