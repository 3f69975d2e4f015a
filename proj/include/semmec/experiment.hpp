#pragma once

// Experiment orchestration: training per method, checkpoints, sweeps over one
// configuration axis, and CSV/JSON output.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "semmec/config.hpp"
#include "semmec/d3qn.hpp"
#include "semmec/evaluate.hpp"
#include "semmec/mappo.hpp"

namespace semmec {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Method method = Method::Local;
  std::uint64_t seed = 0;
  EnvConfig env;
  std::optional<ActorCritic> actor_critic;  // MAPPO variants
  ValueNorm value_norm;
  std::optional<QNetwork> qnet;             // D3QN variants
  std::vector<AdamState> optimizers;        // actor, log_std, critic or the Q network
};

nlohmann::json checkpoint_to_json(const Checkpoint& c);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Greedy policy of a checkpoint, acting under `env` (bounds and grid).
std::shared_ptr<const Policy> make_policy(const Checkpoint& c, const EnvConfig& env);

struct TrainOutput {
  Checkpoint checkpoint;
  std::vector<TrainLogRow> log;
};

// Local needs no training and returns an empty log.
TrainOutput train_method(Method method, const ExperimentSpec& spec, const EnvConfig& env,
                         std::uint64_t seed,
                         const std::function<void(const TrainLogRow&)>& on_episode = {});

// Applies an axis point to the base environment.
EnvConfig env_at(const ExperimentSpec& spec, const AxisPoint& point);

struct CellResult {
  std::size_t point = 0;
  Method method = Method::Local;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  EvalMetrics metrics;
  std::vector<TrainLogRow> log;
};

struct ResultTable {
  SweepAxis axis = SweepAxis::None;
  std::vector<AxisPoint> points;
  std::vector<Method> methods;
  std::vector<CellResult> cells;  // point-major, then method, then seed

  bool all_ok() const;
};

// Trains (where needed) and evaluates every point x method x seed cell on up
// to spec.workers threads. Failures are recorded per cell. The table order is
// fixed by the spec, not by completion order.
ResultTable run_experiment(const ExperimentSpec& spec,
                           const std::function<void(const CellResult&)>& on_cell = {});

// results.csv, summary.json, plot_<metric>.csv and logs/*.csv.
void emit_outputs(const ResultTable& table, const ExperimentSpec& spec,
                  const std::filesystem::path& dir);

// Mean and sample std over the successful seeds of one point/method.
struct Aggregate {
  std::size_t point = 0;
  Method method = Method::Local;
  int seeds = 0;
  Summary qoe, latency, energy, accuracy, reward;
};
std::vector<Aggregate> aggregate(const ResultTable& table);

// Shortest representation that parses back to the same double.
std::string format_number(double x);
// RFC 4180: quoted when the field holds a comma, quote, CR or LF.
std::string csv_field(std::string_view s);
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log);
void write_eval_csv(std::ostream& out, const std::string& method, const EvalMetrics& m);

}  // namespace semmec
