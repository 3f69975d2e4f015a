#include "semmec/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

namespace semmec {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

// Reads the keys of one JSON object, remembering which ones were consumed so
// leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  std::string sub(const std::string& key) const { return path_ + "." + key; }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void get(const char* key, T& out) {
    const json* v = find(key);
    if (!v) return;
    out = convert<T>(*v, sub(key));
  }

  // Value given in mW, stored in W.
  void get_mw(const char* key, double& watts) {
    const json* v = find(key);
    if (!v) return;
    watts = convert<double>(*v, sub(key)) / 1e3;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) fail(sub(item.key()), "unknown key");
  }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) return v.get<T>();
        if (v.get<std::int64_t>() < 0) fail(path, "expected a non-negative integer");
      }
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) fail(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(path, "expected a string");
      return v.get<std::string>();
    } else {
      if (!v.is_array()) fail(path, "expected an array");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i)
        out.push_back(convert<typename T::value_type>(v[i], path + "[" + std::to_string(i) + "]"));
      return out;
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class F>
void validated(const std::string& path, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    fail(path, e.what());
  }
}

const char* task_key(std::size_t i) {
  static const char* names[] = {"text", "image", "vqa"};
  return names[i];
}

void read_profile(const json& j, const std::string& path, ComputeProfile& p) {
  Section s(j, path);
  s.get("cuda_cores", p.cuda_cores);
  s.get("clock_hz", p.clock_hz);
  s.get("flops_per_cycle", p.flops_per_cycle);
  s.get("energy_coeff", p.energy_coeff);
  s.finish();
}

json profile_json(const ComputeProfile& p) {
  return {{"cuda_cores", p.cuda_cores},
          {"clock_hz", p.clock_hz},
          {"flops_per_cycle", p.flops_per_cycle},
          {"energy_coeff", p.energy_coeff}};
}

QoEWeights read_weights(const json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return weight_preset(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      fail(path, e.what());
    }
  }
  QoEWeights w;
  if (j.is_array()) {
    if (j.size() != 3) fail(path, "expected [w_t, w_e, w_a]");
    w.time = Section::convert<double>(j[0], path + "[0]");
    w.energy = Section::convert<double>(j[1], path + "[1]");
    w.accuracy = Section::convert<double>(j[2], path + "[2]");
  } else {
    Section s(j, path);
    s.get("time", w.time);
    s.get("energy", w.energy);
    s.get("accuracy", w.accuracy);
    s.finish();
  }
  validated(path, [&] { w.validate(); });
  return w;
}

json weights_json(const QoEWeights& w) {
  return {{"time", w.time}, {"energy", w.energy}, {"accuracy", w.accuracy}};
}

}  // namespace

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::None: return "none";
    case SweepAxis::Bandwidth: return "bandwidth";
    case SweepAxis::Noise: return "noise";
    case SweepAxis::NUsers: return "n_users";
    case SweepAxis::MuMin: return "mu_min";
    case SweepAxis::Weights: return "weights";
  }
  return "none";
}

std::string to_string(Method method) {
  switch (method) {
    case Method::Mappo: return "mappo";
    case Method::MappoUnaware: return "mappo_unaware";
    case Method::D3qn: return "d3qn";
    case Method::D3qnUnaware: return "d3qn_unaware";
    case Method::Local: return "local";
  }
  return "local";
}

Method method_from_string(const std::string& name) {
  for (Method m : {Method::Mappo, Method::MappoUnaware, Method::D3qn, Method::D3qnUnaware,
                   Method::Local})
    if (to_string(m) == name) return m;
  throw std::invalid_argument("unknown method '" + name + "'");
}

QoEWeights weight_preset(const std::string& name) {
  if (name == "none") return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  if (name == "delay") return {1.0, 0.0, 0.0};
  if (name == "energy") return {0.0, 1.0, 0.0};
  if (name == "accuracy") return {0.0, 0.0, 1.0};
  throw std::invalid_argument("unknown weight preset '" + name + "'");
}

json env_config_to_json(const EnvConfig& c) {
  json tasks = json::object();
  json mix = json::object();
  for (std::size_t i = 0; i < kTaskTypeCount; ++i) {
    const TaskSpec& t = c.tasks[i];
    json tj = {{"data_bits", t.data_bits},
               {"local_flops", t.local_flops},
               {"se_flops", t.se_flops},
               {"server_flops", t.server_flops},
               {"accuracy_target", t.accuracy_target}};
    if (t.local_accuracy) tj["local_accuracy"] = *t.local_accuracy;
    tasks[task_key(i)] = tj;
    mix[task_key(i)] = c.task_mix[i];
  }
  return {
      {"n_ues", c.n_ues},
      {"k_channels", c.k_channels},
      {"queue_len", c.queue_len},
      {"bandwidth_hz", c.bandwidth_hz},
      {"noise_mw", c.noise_w * 1e3},
      {"p_min_mw", c.p_min_w * 1e3},
      {"p_max_mw", c.p_max_w * 1e3},
      {"mu_min", c.mu_min},
      {"f_min_hz", c.f_min_hz},
      {"f_max_hz", c.f_max_hz},
      {"ue", profile_json(c.ue)},
      {"es", profile_json(c.es)},
      {"t_max_s", c.t_max_s},
      {"e_max_j", c.e_max_j},
      {"eps_min", c.eps_min},
      {"p_exp", c.p_exp},
      {"q_exp", c.q_exp},
      {"weights", weights_json(c.weights)},
      {"qoe", {{"lambda_scale", c.qoe.lambda_scale},
               {"beta_scale", c.qoe.beta_scale},
               {"eta", c.qoe.eta}}},
      {"task_mix", mix},
      {"tasks", tasks},
      {"accuracy_shape", {{"mu_shape", c.accuracy_shape.mu_shape},
                          {"mu_scale", c.accuracy_shape.mu_scale},
                          {"snr_midpoint_db", c.accuracy_shape.snr_midpoint_db},
                          {"snr_steepness", c.accuracy_shape.snr_steepness}}},
      {"local_accuracy_margin", c.local_accuracy_margin},
      {"accuracy_table", c.accuracy_table},
      {"distance_min_m", c.distance_min_m},
      {"distance_max_m", c.distance_max_m},
      {"reference_distance_m", c.reference_distance_m},
      {"path_loss_exp", c.path_loss_exp},
      {"conflict_penalty", c.conflict_penalty},
      {"violation_mode", c.violation_mode == ViolationMode::Sum ? "sum" : "first"},
      {"es_energy_attribution",
       c.es_energy_attribution == EsEnergyAttribution::Proportional ? "proportional" : "full"},
      {"seed", c.seed},
  };
}

EnvConfig env_config_from_json(const json& j, const std::string& path) {
  EnvConfig c;
  Section s(j, path);
  s.get("n_ues", c.n_ues);
  s.get("k_channels", c.k_channels);
  s.get("queue_len", c.queue_len);
  s.get("bandwidth_hz", c.bandwidth_hz);
  s.get_mw("noise_mw", c.noise_w);
  s.get_mw("p_min_mw", c.p_min_w);
  s.get_mw("p_max_mw", c.p_max_w);
  s.get("mu_min", c.mu_min);
  s.get("f_min_hz", c.f_min_hz);
  s.get("f_max_hz", c.f_max_hz);
  if (const json* v = s.find("ue")) read_profile(*v, s.sub("ue"), c.ue);
  if (const json* v = s.find("es")) read_profile(*v, s.sub("es"), c.es);
  s.get("t_max_s", c.t_max_s);
  s.get("e_max_j", c.e_max_j);
  s.get("eps_min", c.eps_min);
  s.get("p_exp", c.p_exp);
  s.get("q_exp", c.q_exp);
  if (const json* v = s.find("weights")) c.weights = read_weights(*v, s.sub("weights"));
  if (const json* v = s.find("qoe")) {
    Section q(*v, s.sub("qoe"));
    q.get("lambda_scale", c.qoe.lambda_scale);
    q.get("beta_scale", c.qoe.beta_scale);
    q.get("eta", c.qoe.eta);
    q.finish();
  }
  if (const json* v = s.find("task_mix")) {
    Section m(*v, s.sub("task_mix"));
    for (std::size_t i = 0; i < kTaskTypeCount; ++i) m.get(task_key(i), c.task_mix[i]);
    m.finish();
  }
  if (const json* v = s.find("tasks")) {
    Section ts(*v, s.sub("tasks"));
    for (std::size_t i = 0; i < kTaskTypeCount; ++i) {
      const json* tv = ts.find(task_key(i));
      if (!tv) continue;
      TaskSpec& t = c.tasks[i];
      Section tsec(*tv, ts.sub(task_key(i)));
      tsec.get("data_bits", t.data_bits);
      tsec.get("local_flops", t.local_flops);
      tsec.get("se_flops", t.se_flops);
      tsec.get("server_flops", t.server_flops);
      tsec.get("accuracy_target", t.accuracy_target);
      if (const json* la = tsec.find("local_accuracy"))
        t.local_accuracy = Section::convert<double>(*la, tsec.sub("local_accuracy"));
      tsec.finish();
    }
    ts.finish();
  }
  if (const json* v = s.find("accuracy_shape")) {
    Section a(*v, s.sub("accuracy_shape"));
    a.get("mu_shape", c.accuracy_shape.mu_shape);
    a.get("mu_scale", c.accuracy_shape.mu_scale);
    a.get("snr_midpoint_db", c.accuracy_shape.snr_midpoint_db);
    a.get("snr_steepness", c.accuracy_shape.snr_steepness);
    a.finish();
  }
  s.get("local_accuracy_margin", c.local_accuracy_margin);
  s.get("accuracy_table", c.accuracy_table);
  s.get("distance_min_m", c.distance_min_m);
  s.get("distance_max_m", c.distance_max_m);
  s.get("reference_distance_m", c.reference_distance_m);
  s.get("path_loss_exp", c.path_loss_exp);
  s.get("conflict_penalty", c.conflict_penalty);
  std::string mode;
  s.get("violation_mode", mode);
  if (mode == "first") c.violation_mode = ViolationMode::First;
  else if (!mode.empty() && mode != "sum") fail(s.sub("violation_mode"), "expected 'sum' or 'first'");
  std::string attribution;
  s.get("es_energy_attribution", attribution);
  if (attribution == "full") c.es_energy_attribution = EsEnergyAttribution::Full;
  else if (!attribution.empty() && attribution != "proportional")
    fail(s.sub("es_energy_attribution"), "expected 'proportional' or 'full'");
  s.get("seed", c.seed);
  s.finish();
  validated(path, [&] { c.validate(); });
  return c;
}

json policy_config_to_json(const PolicyConfig& c) {
  return {{"hidden", c.hidden},
          {"semantic_aware", c.semantic_aware},
          {"agent_slot_feature", c.agent_slot_feature},
          {"relative_channels", c.relative_channels},
          {"critic_distances", c.critic_distances},
          {"init_log_std", c.init_log_std}};
}

PolicyConfig policy_config_from_json(const json& j, const std::string& path) {
  PolicyConfig c;
  Section s(j, path);
  s.get("hidden", c.hidden);
  s.get("semantic_aware", c.semantic_aware);
  s.get("agent_slot_feature", c.agent_slot_feature);
  s.get("relative_channels", c.relative_channels);
  s.get("critic_distances", c.critic_distances);
  s.get("init_log_std", c.init_log_std);
  s.finish();
  if (c.hidden.empty()) fail(s.sub("hidden"), "needs at least one hidden layer");
  for (int h : c.hidden)
    if (h < 1) fail(s.sub("hidden"), "layer sizes must be positive");
  if (c.init_log_std < kLogStdMin || c.init_log_std > kLogStdMax)
    fail(s.sub("init_log_std"), "must lie in [-5, 2]");
  return c;
}

json ppo_hyper_to_json(const PpoHyper& h) {
  return {{"gamma", h.gamma},
          {"lambda", h.lambda},
          {"clip_eps", h.clip_eps},
          {"entropy_weight", h.entropy_weight},
          {"critic_weight", h.critic_weight},
          {"epochs", h.epochs},
          {"minibatches", h.minibatches},
          {"minibatch_size", h.minibatch_size},
          {"episodes", h.episodes},
          {"rollouts_per_update", h.rollouts_per_update},
          {"threads", h.threads},
          {"lr", h.lr},
          {"critic_lr", h.critic_lr},
          {"normalize_advantages", h.normalize_advantages},
          {"team_reward", h.team_reward},
          {"advantage_estimator",
           h.advantage_estimator == AdvantageEstimator::Gae ? "gae" : "exogenous"},
          {"value_normalization", h.value_normalization},
          {"divergence_reward", h.divergence_reward},
          {"divergence_window", h.divergence_window}};
}

PpoHyper ppo_hyper_from_json(const json& j, const std::string& path) {
  PpoHyper h;
  Section s(j, path);
  s.get("gamma", h.gamma);
  s.get("lambda", h.lambda);
  s.get("clip_eps", h.clip_eps);
  s.get("entropy_weight", h.entropy_weight);
  s.get("critic_weight", h.critic_weight);
  s.get("epochs", h.epochs);
  s.get("minibatches", h.minibatches);
  s.get("minibatch_size", h.minibatch_size);
  s.get("episodes", h.episodes);
  s.get("rollouts_per_update", h.rollouts_per_update);
  s.get("threads", h.threads);
  s.get("lr", h.lr);
  s.get("critic_lr", h.critic_lr);
  s.get("normalize_advantages", h.normalize_advantages);
  s.get("team_reward", h.team_reward);
  std::string est;
  s.get("advantage_estimator", est);
  if (est == "gae") h.advantage_estimator = AdvantageEstimator::Gae;
  else if (!est.empty() && est != "exogenous")
    fail(s.sub("advantage_estimator"), "expected 'gae' or 'exogenous'");
  s.get("value_normalization", h.value_normalization);
  s.get("divergence_reward", h.divergence_reward);
  s.get("divergence_window", h.divergence_window);
  s.finish();
  validated(path, [&] { h.validate(); });
  return h;
}

json d3qn_hyper_to_json(const D3qnHyper& h) {
  return {{"episodes", h.episodes},
          {"gamma", h.gamma},
          {"lr", h.lr},
          {"batch", h.batch},
          {"buffer", h.buffer},
          {"target_sync", h.target_sync},
          {"eps_start", h.eps_start},
          {"eps_end", h.eps_end},
          {"eps_decay_fraction", h.eps_decay_fraction},
          {"learn_start", h.learn_start},
          {"updates_per_step", h.updates_per_step},
          {"hidden", h.hidden},
          {"divergence_reward", h.divergence_reward},
          {"divergence_window", h.divergence_window}};
}

D3qnHyper d3qn_hyper_from_json(const json& j, const std::string& path) {
  D3qnHyper h;
  Section s(j, path);
  s.get("episodes", h.episodes);
  s.get("gamma", h.gamma);
  s.get("lr", h.lr);
  s.get("batch", h.batch);
  s.get("buffer", h.buffer);
  s.get("target_sync", h.target_sync);
  s.get("eps_start", h.eps_start);
  s.get("eps_end", h.eps_end);
  s.get("eps_decay_fraction", h.eps_decay_fraction);
  s.get("learn_start", h.learn_start);
  s.get("updates_per_step", h.updates_per_step);
  s.get("hidden", h.hidden);
  s.get("divergence_reward", h.divergence_reward);
  s.get("divergence_window", h.divergence_window);
  s.finish();
  validated(path, [&] { h.validate(); });
  return h;
}

void ExperimentSpec::validate() const {
  env.validate();
  ppo.validate();
  d3qn.validate();
  if (methods.empty()) throw std::invalid_argument("at least one method is required");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (points.empty()) throw std::invalid_argument("axis values must be non-empty");
  if (eval_runs < 1) throw std::invalid_argument("eval_runs must be >= 1");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
}

ExperimentSpec experiment_from_json(const json& j) {
  ExperimentSpec spec;
  Section root(j, "config");
  if (const json* v = root.find("env")) spec.env = env_config_from_json(*v, "env");
  if (const json* v = root.find("policy")) spec.policy = policy_config_from_json(*v, "policy");
  if (const json* v = root.find("ppo")) spec.ppo = ppo_hyper_from_json(*v, "ppo");
  if (const json* v = root.find("d3qn")) spec.d3qn = d3qn_hyper_from_json(*v, "d3qn");

  const json* ev = root.find("experiment");
  root.finish();
  spec.points = {AxisPoint{0, spec.env.weights, "base"}};
  if (!ev) return spec;

  Section s(*ev, "experiment");
  std::string axis = "none";
  s.get("axis", axis);
  if (axis == "none") spec.axis = SweepAxis::None;
  else if (axis == "bandwidth") spec.axis = SweepAxis::Bandwidth;
  else if (axis == "noise") spec.axis = SweepAxis::Noise;
  else if (axis == "n_users") spec.axis = SweepAxis::NUsers;
  else if (axis == "mu_min") spec.axis = SweepAxis::MuMin;
  else if (axis == "weights") spec.axis = SweepAxis::Weights;
  else fail(s.sub("axis"), "unknown axis '" + axis + "'");

  if (const json* vals = s.find("values")) {
    const std::string vpath = s.sub("values");
    if (!vals->is_array() || vals->empty()) fail(vpath, "expected a non-empty array");
    if (spec.axis == SweepAxis::None) fail(vpath, "values need an axis");
    spec.points.clear();
    for (std::size_t i = 0; i < vals->size(); ++i) {
      const std::string p = vpath + "[" + std::to_string(i) + "]";
      const json& v = (*vals)[i];
      AxisPoint pt;
      if (spec.axis == SweepAxis::Weights) {
        pt.weights = read_weights(v, p);
        pt.value = static_cast<double>(i);
        if (v.is_string()) {
          pt.label = v.get<std::string>();
        } else {
          std::ostringstream os;
          os << pt.weights.time << "/" << pt.weights.energy << "/" << pt.weights.accuracy;
          pt.label = os.str();
        }
      } else {
        pt.value = Section::convert<double>(v, p);
        if (spec.axis == SweepAxis::NUsers &&
            (pt.value < 1 || pt.value != std::floor(pt.value)))
          fail(p, "user counts must be positive integers");
        std::ostringstream os;
        os << pt.value;
        pt.label = os.str();
      }
      spec.points.push_back(pt);
    }
  } else if (spec.axis != SweepAxis::None) {
    fail(s.sub("values"), "required when an axis is set");
  }

  std::vector<std::string> methods;
  s.get("methods", methods);
  if (s.find("methods")) {
    spec.methods.clear();
    for (std::size_t i = 0; i < methods.size(); ++i) {
      try {
        spec.methods.push_back(method_from_string(methods[i]));
      } catch (const std::invalid_argument& e) {
        fail(s.sub("methods") + "[" + std::to_string(i) + "]", e.what());
      }
    }
  }
  s.get("seeds", spec.seeds);
  s.get("eval_runs", spec.eval_runs);
  s.get("eval_seed", spec.eval_seed);
  s.get("workers", spec.workers);
  s.get("out_dir", spec.out_dir);
  s.get("train_at_base", spec.train_at_base);
  s.finish();

  // Each point must describe a valid environment.
  for (std::size_t i = 0; i < spec.points.size(); ++i) {
    EnvConfig probe = spec.env;
    const AxisPoint& pt = spec.points[i];
    switch (spec.axis) {
      case SweepAxis::Bandwidth: probe.bandwidth_hz = pt.value; break;
      case SweepAxis::Noise: probe.noise_w = pt.value / 1e3; break;
      case SweepAxis::NUsers: probe.n_ues = static_cast<int>(pt.value); break;
      case SweepAxis::MuMin: probe.mu_min = pt.value; break;
      case SweepAxis::Weights: probe.weights = pt.weights; break;
      case SweepAxis::None: break;
    }
    validated("experiment.values[" + std::to_string(i) + "]", [&] { probe.validate(); });
  }
  validated("experiment", [&] { spec.validate(); });
  return spec;
}

json experiment_to_json(const ExperimentSpec& spec) {
  json values = json::array();
  for (const auto& p : spec.points) {
    if (spec.axis == SweepAxis::Weights)
      values.push_back(json::array({p.weights.time, p.weights.energy, p.weights.accuracy}));
    else
      values.push_back(p.value);
  }
  json methods = json::array();
  for (Method m : spec.methods) methods.push_back(to_string(m));
  json exp = {{"axis", to_string(spec.axis)},
              {"methods", methods},
              {"seeds", spec.seeds},
              {"eval_runs", spec.eval_runs},
              {"eval_seed", spec.eval_seed},
              {"workers", spec.workers},
              {"train_at_base", spec.train_at_base},
              {"out_dir", spec.out_dir}};
  if (spec.axis != SweepAxis::None) exp["values"] = values;
  return {{"env", env_config_to_json(spec.env)},
          {"policy", policy_config_to_json(spec.policy)},
          {"ppo", ppo_hyper_to_json(spec.ppo)},
          {"d3qn", d3qn_hyper_to_json(spec.d3qn)},
          {"experiment", exp}};
}

ExperimentSpec parse_config(const std::string& text) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    ExperimentSpec spec;
    spec.points = {AxisPoint{0, spec.env.weights, "base"}};
    return spec;
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return experiment_from_json(j);
}

ExperimentSpec load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace semmec
