#pragma once

// JSON configuration: sections `env`, `policy`, `ppo`, `d3qn` and
// `experiment`. Missing keys keep their defaults, unknown keys are rejected
// with their dotted path. Powers are written in mW and converted to W here,
// once.

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "semmec/d3qn.hpp"
#include "semmec/env.hpp"
#include "semmec/mappo.hpp"
#include "semmec/policy.hpp"

namespace semmec {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SweepAxis { None, Bandwidth, Noise, NUsers, MuMin, Weights };
enum class Method { Mappo, MappoUnaware, D3qn, D3qnUnaware, Local };

std::string to_string(SweepAxis axis);
std::string to_string(Method method);
Method method_from_string(const std::string& name);

// One point on the sweep axis. `value` is the axis coordinate in config
// units (Hz, mW, users, mu); weight points carry their weights and a label.
struct AxisPoint {
  double value = 0;
  QoEWeights weights;
  std::string label;
};

struct ExperimentSpec {
  EnvConfig env;
  PolicyConfig policy;
  PpoHyper ppo;
  D3qnHyper d3qn;
  SweepAxis axis = SweepAxis::None;
  std::vector<AxisPoint> points;  // a single base point when axis is None
  std::vector<Method> methods{Method::Mappo};
  std::vector<std::uint64_t> seeds{1};
  int eval_runs = 200;
  std::uint64_t eval_seed = 1000;
  int workers = 1;  // concurrent sweep cells
  // Train once on the base env and evaluate at every point (actions clipped
  // to each point's ranges) instead of retraining per point.
  bool train_at_base = false;
  std::string out_dir = "results";

  void validate() const;
};

// Named presets: none, delay, energy, accuracy.
QoEWeights weight_preset(const std::string& name);

nlohmann::json env_config_to_json(const EnvConfig& c);
EnvConfig env_config_from_json(const nlohmann::json& j, const std::string& path = "env");

nlohmann::json policy_config_to_json(const PolicyConfig& c);
PolicyConfig policy_config_from_json(const nlohmann::json& j, const std::string& path = "policy");

nlohmann::json ppo_hyper_to_json(const PpoHyper& h);
PpoHyper ppo_hyper_from_json(const nlohmann::json& j, const std::string& path = "ppo");

nlohmann::json d3qn_hyper_to_json(const D3qnHyper& h);
D3qnHyper d3qn_hyper_from_json(const nlohmann::json& j, const std::string& path = "d3qn");

ExperimentSpec experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentSpec& spec);

// An empty or whitespace-only file yields the defaults.
ExperimentSpec load_config(const std::filesystem::path& path);
ExperimentSpec parse_config(const std::string& text);

}  // namespace semmec
