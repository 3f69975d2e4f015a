// Python bindings. Configs, checkpoints and instances cross the boundary as
// JSON text; the Python package wraps them in dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>

#include "semmec/config.hpp"
#include "semmec/experiment.hpp"
#include "semmec/oracle.hpp"

namespace py = pybind11;
using namespace semmec;

namespace {

py::dict observation_dict(const Observation& o) {
  py::dict d;
  d["gains"] = o.gains;
  d["l_u"] = o.l_u;
  d["l_s"] = o.l_s;
  d["agent_index"] = o.agent_index;
  return d;
}

py::list observations(const std::vector<Observation>& obs) {
  py::list out;
  for (const auto& o : obs) out.append(observation_dict(o));
  return out;
}

AgentAction action_from(const py::dict& d) {
  AgentAction a;
  a.offload = d.contains("offload") && d["offload"].cast<bool>();
  if (d.contains("channel")) a.channel = d["channel"].cast<int>();
  if (d.contains("p_w")) a.p_w = d["p_w"].cast<double>();
  if (d.contains("f_hz")) a.f_hz = d["f_hz"].cast<double>();
  if (d.contains("mu")) a.mu = d["mu"].cast<double>();
  return a;
}

py::dict action_dict(const AgentAction& a) {
  py::dict d;
  d["offload"] = a.offload;
  d["channel"] = a.channel;
  d["p_w"] = a.p_w;
  d["f_hz"] = a.f_hz;
  d["mu"] = a.mu;
  return d;
}

py::dict step_dict(const StepResult& r) {
  py::list outcomes;
  for (const auto& o : r.outcomes) {
    py::dict d;
    d["type"] = std::string(to_string(o.type));
    d["offloaded"] = o.offloaded;
    d["conflict"] = o.conflict;
    d["latency"] = o.latency;
    d["energy"] = o.energy;
    d["accuracy"] = o.accuracy;
    d["qoe"] = o.qoe;
    d["earned_qoe"] = earned_qoe(o);
    d["violations"] = o.violations.size();
    outcomes.append(d);
  }
  py::dict d;
  d["rewards"] = r.rewards;
  d["outcomes"] = outcomes;
  d["done"] = r.done;
  return d;
}

py::dict summary_dict(const Summary& s) {
  py::dict d;
  d["mean"] = s.mean;
  d["std"] = s.std;
  d["ci95"] = s.ci95;
  d["n"] = s.n;
  return d;
}

py::dict metrics_dict(const EvalMetrics& m) {
  py::dict d;
  d["runs"] = m.runs;
  d["qoe"] = summary_dict(m.qoe);
  d["latency"] = summary_dict(m.latency);
  d["energy"] = summary_dict(m.energy);
  d["accuracy"] = summary_dict(m.accuracy);
  d["reward"] = summary_dict(m.reward);
  d["offload_fraction"] = m.offload_fraction;
  d["conflict_fraction"] = m.conflict_fraction;
  d["violation_fraction"] = m.violation_fraction;
  d["run_qoe"] = m.run_qoe;
  return d;
}

EnvConfig env_from(const std::string& config_json) { return parse_config(config_json).env; }

class PyEnv {
 public:
  PyEnv(const std::string& config_json, std::uint64_t seed) : env_(env_from(config_json), seed) {}

  py::list reset(std::optional<std::uint64_t> seed) {
    return observations(seed ? env_.reset(*seed) : env_.reset());
  }
  py::dict step(const py::list& actions) {
    std::vector<AgentAction> acts;
    for (const auto& a : actions) acts.push_back(action_from(a.cast<py::dict>()));
    return step_dict(env_.step(acts));
  }
  bool done() const { return env_.done(); }
  int n_ues() const { return env_.config().n_ues; }
  int k_channels() const { return env_.config().k_channels; }
  std::vector<std::string> task_types() const {
    std::vector<std::string> out;
    for (const auto& t : env_.state().tasks) out.emplace_back(to_string(t.type));
    return out;
  }

 private:
  Env env_;
};

}  // namespace

PYBIND11_MODULE(_semmec, m) {
  m.doc() = "Semantic-aware multi-task offloading core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<PyEnv>(m, "Env")
      .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_json") = "", py::arg("seed") = 1)
      .def("reset", &PyEnv::reset, py::arg("seed") = py::none())
      .def("step", &PyEnv::step, py::arg("actions"))
      .def_property_readonly("done", &PyEnv::done)
      .def_property_readonly("n_ues", &PyEnv::n_ues)
      .def_property_readonly("k_channels", &PyEnv::k_channels)
      .def_property_readonly("task_types", &PyEnv::task_types);

  m.def("normalize_config", [](const std::string& text) { return experiment_to_json(parse_config(text)).dump(); },
        py::arg("config_json"), "Parse, validate and return the config with every default filled in.");

  m.def("evaluate_local", [](const std::string& config_json, int runs, std::uint64_t seed) {
    const EnvConfig env = env_from(config_json);
    return metrics_dict(evaluate_policy(LocalPolicy(env), EnvModel::build(env), runs, seed));
  }, py::arg("config_json") = "", py::arg("runs") = 200, py::arg("seed") = 1000);

  m.def("train", [](const std::string& method, const std::string& config_json, std::uint64_t seed) {
    const ExperimentSpec spec = parse_config(config_json);
    TrainOutput out;
    {
      py::gil_scoped_release release;
      out = train_method(method_from_string(method), spec, spec.env, seed);
    }
    py::list log;
    for (const auto& r : out.log)
      log.append(py::dict(py::arg("episode") = r.episode, py::arg("mean_reward") = r.mean_reward,
                          py::arg("mean_qoe") = r.mean_qoe, py::arg("entropy") = r.entropy,
                          py::arg("critic_loss") = r.critic_loss));
    return py::make_tuple(checkpoint_to_json(out.checkpoint).dump(), log);
  }, py::arg("method"), py::arg("config_json") = "", py::arg("seed") = 1,
     "Returns (checkpoint_json, training_log).");

  m.def("evaluate_checkpoint", [](const std::string& checkpoint_json, int runs, std::uint64_t seed) {
    const Checkpoint c = checkpoint_from_json(nlohmann::json::parse(checkpoint_json));
    const auto policy = make_policy(c, c.env);
    py::gil_scoped_release release;
    const EvalMetrics m = evaluate_policy(*policy, EnvModel::build(c.env), runs, seed);
    py::gil_scoped_acquire acquire;
    return metrics_dict(m);
  }, py::arg("checkpoint_json"), py::arg("runs") = 200, py::arg("seed") = 1000);

  m.def("freeze_instance", [](const std::string& config_json, std::uint64_t seed) {
    return frozen_instance_to_json(FrozenInstance::sample(env_from(config_json), seed)).dump();
  }, py::arg("config_json") = "", py::arg("seed") = 1);

  m.def("oracle", [](const std::string& instance_json, bool aware, int threads) {
    const FrozenInstance inst = frozen_instance_from_json(nlohmann::json::parse(instance_json));
    const auto table = DiscreteActionTable::build(inst.config, aware);
    OracleResult r;
    {
      py::gil_scoped_release release;
      r = brute_force_best(inst, table, threads);
    }
    py::list actions;
    for (const auto& a : r.actions) actions.append(action_dict(a));
    py::dict d;
    d["total_qoe"] = r.total_qoe;
    d["actions"] = actions;
    d["enumerated"] = r.enumerated;
    d["feasible"] = r.feasible_count;
    return d;
  }, py::arg("instance_json"), py::arg("aware") = true, py::arg("threads") = 1);

  m.def("mann_kendall", [](const std::vector<double>& xs) {
    const MannKendall mk = mann_kendall(xs);
    return py::dict(py::arg("s") = mk.s, py::arg("variance") = mk.variance, py::arg("z") = mk.z,
                    py::arg("p_decreasing") = mk.p_decreasing, py::arg("p_increasing") = mk.p_increasing);
  }, py::arg("values"));
}
