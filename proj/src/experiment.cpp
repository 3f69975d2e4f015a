#include "semmec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "semmec/oracle.hpp"

namespace semmec {

using nlohmann::json;

namespace {

json value_norm_json(const ValueNorm& v) {
  return {{"enabled", v.enabled}, {"count", v.count}, {"mean", v.mean}, {"m2", v.m2}};
}

ValueNorm value_norm_from(const json& j) {
  ValueNorm v;
  v.enabled = j.at("enabled").get<bool>();
  v.count = j.at("count").get<double>();
  v.mean = j.at("mean").get<double>();
  v.m2 = j.at("m2").get<double>();
  return v;
}

bool is_mappo(Method m) { return m == Method::Mappo || m == Method::MappoUnaware; }
bool is_d3qn(Method m) { return m == Method::D3qn || m == Method::D3qnUnaware; }

}  // namespace

json checkpoint_to_json(const Checkpoint& c) {
  json j = {{"format", "semmec-checkpoint"},
            {"version", kCheckpointVersion},
            {"method", to_string(c.method)},
            {"seed", c.seed},
            {"env", env_config_to_json(c.env)}};
  if (c.actor_critic) {
    j["actor_critic"] = actor_critic_to_json(*c.actor_critic);
    j["value_norm"] = value_norm_json(c.value_norm);
  }
  if (c.qnet) j["qnet"] = qnetwork_to_json(*c.qnet);
  json opts = json::array();
  for (const auto& o : c.optimizers) opts.push_back(adam_to_json(o));
  j["optimizers"] = opts;
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  if (j.value("format", "") != "semmec-checkpoint")
    throw std::invalid_argument("checkpoint: not a semmec checkpoint");
  if (j.value("version", 0) != kCheckpointVersion)
    throw std::invalid_argument("checkpoint: unsupported version " +
                                std::to_string(j.value("version", 0)));
  Checkpoint c;
  c.method = method_from_string(j.at("method").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.env = env_config_from_json(j.at("env"), "env");
  if (is_mappo(c.method)) {
    c.actor_critic = actor_critic_from_json(j.at("actor_critic"));
    c.value_norm = value_norm_from(j.at("value_norm"));
  }
  if (is_d3qn(c.method)) c.qnet = qnetwork_from_json(j.at("qnet"), c.env);
  for (const auto& o : j.at("optimizers")) c.optimizers.push_back(adam_from_json(o));
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  out << checkpoint_to_json(c).dump() << '\n';
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");
  try {
    return checkpoint_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::shared_ptr<const Policy> make_policy(const Checkpoint& c, const EnvConfig& env) {
  switch (c.method) {
    case Method::Local:
      return std::make_shared<LocalPolicy>(env);
    case Method::Mappo:
    case Method::MappoUnaware:
      if (!c.actor_critic) throw std::invalid_argument("checkpoint has no actor");
      if (c.actor_critic->k_channels != env.k_channels)
        throw std::invalid_argument("checkpoint was trained for a different channel count");
      return std::make_shared<MappoPolicy>(*c.actor_critic, ActionBounds::from(env));
    case Method::D3qn:
    case Method::D3qnUnaware: {
      if (!c.qnet) throw std::invalid_argument("checkpoint has no Q network");
      if (c.qnet->table.k_channels() != env.k_channels)
        throw std::invalid_argument("checkpoint was trained for a different channel count");
      QNetwork q = *c.qnet;
      q.table = DiscreteActionTable::build(env, q.semantic_aware);
      if (q.table.size() != c.qnet->table.size())
        throw std::invalid_argument("evaluation grid differs from the training grid");
      return std::make_shared<D3qnPolicy>(std::move(q));
    }
  }
  throw std::invalid_argument("unknown method");
}

TrainOutput train_method(Method method, const ExperimentSpec& spec, const EnvConfig& env,
                         std::uint64_t seed,
                         const std::function<void(const TrainLogRow&)>& on_episode) {
  TrainOutput out;
  out.checkpoint.method = method;
  out.checkpoint.seed = seed;
  out.checkpoint.env = env;
  const bool aware = method == Method::Mappo || method == Method::D3qn;
  if (is_mappo(method)) {
    PolicyConfig pc = spec.policy;
    pc.semantic_aware = aware;
    MappoResult r = train_mappo(env, pc, spec.ppo, seed, on_episode);
    out.checkpoint.actor_critic = std::move(r.model);
    out.checkpoint.value_norm = r.value_norm;
    out.checkpoint.optimizers = {std::move(r.actor_opt), std::move(r.log_std_opt),
                                 std::move(r.critic_opt)};
    out.log = std::move(r.log);
  } else if (is_d3qn(method)) {
    const FeatureSpec features{env.k_channels, spec.policy.agent_slot_feature,
                               spec.policy.relative_channels, spec.policy.critic_distances};
    D3qnResult r = train_d3qn(env, features, aware, spec.d3qn, seed, on_episode);
    out.checkpoint.qnet = std::move(r.model);
    out.checkpoint.optimizers = {std::move(r.opt)};
    out.log = std::move(r.log);
  }
  return out;
}

EnvConfig env_at(const ExperimentSpec& spec, const AxisPoint& point) {
  EnvConfig env = spec.env;
  switch (spec.axis) {
    case SweepAxis::None: break;
    case SweepAxis::Bandwidth: env.bandwidth_hz = point.value; break;
    case SweepAxis::Noise: env.noise_w = point.value / 1e3; break;
    case SweepAxis::NUsers: env.n_ues = static_cast<int>(point.value); break;
    case SweepAxis::MuMin: env.mu_min = point.value; break;
    case SweepAxis::Weights: env.weights = point.weights; break;
  }
  return env;
}

bool ResultTable::all_ok() const {
  for (const auto& c : cells)
    if (!c.ok) return false;
  return true;
}

namespace {

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (int k = 0; k < w; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

// Acts with a policy trained elsewhere and clips its actions into this
// configuration's ranges.
class ClampedPolicy : public Policy {
 public:
  ClampedPolicy(std::shared_ptr<const Policy> inner, const EnvConfig& env)
      : inner_(std::move(inner)), env_(env) {}

  std::vector<AgentAction> act(const StepState& state, std::span<const Observation> obs) const override {
    auto actions = inner_->act(state, obs);
    for (auto& a : actions) {
      a.p_w = std::clamp(a.p_w, env_.p_min_w, env_.p_max_w);
      a.f_hz = std::clamp(a.f_hz, env_.f_min_hz, env_.f_max_hz);
      a.mu = std::clamp(a.mu, env_.mu_min, 1.0);
    }
    return actions;
  }

 private:
  std::shared_ptr<const Policy> inner_;
  EnvConfig env_;
};

}  // namespace

ResultTable run_experiment(const ExperimentSpec& spec,
                           const std::function<void(const CellResult&)>& on_cell) {
  spec.validate();
  ResultTable table;
  table.axis = spec.axis;
  table.points = spec.points;
  table.methods = spec.methods;
  for (std::size_t p = 0; p < spec.points.size(); ++p)
    for (Method m : spec.methods)
      for (std::uint64_t s : spec.seeds) {
        CellResult c;
        c.point = p;
        c.method = m;
        c.seed = s;
        table.cells.push_back(std::move(c));
      }

  // With train_at_base every method/seed is trained once on the base
  // configuration; cells of the first point carry its log.
  struct Job {
    Method method;
    std::uint64_t seed;
    std::optional<TrainOutput> out;
    std::string error;
  };
  std::vector<Job> jobs;
  if (spec.train_at_base) {
    for (Method m : spec.methods)
      for (std::uint64_t s : spec.seeds) jobs.push_back({m, s, std::nullopt, {}});
    parallel_for(jobs.size(), spec.workers, [&](std::size_t i) {
      try {
        jobs[i].out = train_method(jobs[i].method, spec, spec.env, jobs[i].seed);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
      }
    });
  }
  auto job_for = [&](const CellResult& c) -> const Job& {
    for (const auto& j : jobs)
      if (j.method == c.method && j.seed == c.seed) return j;
    throw std::logic_error("run_experiment: missing training job");
  };

  std::mutex report;
  parallel_for(table.cells.size(), spec.workers, [&](std::size_t i) {
    CellResult& cell = table.cells[i];
    try {
      const EnvConfig env = env_at(spec, spec.points[cell.point]);
      std::shared_ptr<const Policy> policy;
      if (spec.train_at_base) {
        const Job& job = job_for(cell);
        if (!job.out) throw std::runtime_error(job.error);
        policy = std::make_shared<ClampedPolicy>(make_policy(job.out->checkpoint, job.out->checkpoint.env), env);
        if (cell.point == 0) cell.log = job.out->log;
      } else {
        TrainOutput trained = train_method(cell.method, spec, env, cell.seed);
        policy = make_policy(trained.checkpoint, env);
        cell.log = std::move(trained.log);
      }
      cell.metrics = evaluate_policy(*policy, EnvModel::build(env), spec.eval_runs, spec.eval_seed);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    if (on_cell) {
      std::lock_guard lock(report);
      on_cell(cell);
    }
  });
  return table;
}

std::vector<Aggregate> aggregate(const ResultTable& table) {
  std::vector<Aggregate> out;
  for (std::size_t p = 0; p < table.points.size(); ++p)
    for (Method m : table.methods) {
      Aggregate a;
      a.point = p;
      a.method = m;
      std::vector<double> q, l, e, acc, r;
      for (const auto& c : table.cells) {
        if (c.point != p || c.method != m || !c.ok) continue;
        q.push_back(c.metrics.qoe.mean);
        l.push_back(c.metrics.latency.mean);
        e.push_back(c.metrics.energy.mean);
        acc.push_back(c.metrics.accuracy.mean);
        r.push_back(c.metrics.reward.mean);
      }
      a.seeds = static_cast<int>(q.size());
      if (!q.empty()) {
        a.qoe = summarize(q);
        a.latency = summarize(l);
        a.energy = summarize(e);
        a.accuracy = summarize(acc);
        a.reward = summarize(r);
      }
      out.push_back(a);
    }
  return out;
}

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << "\r\n";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw std::invalid_argument("parse_csv: unterminated quoted field");
  if (any) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_train_log(std::ostream& out, const std::vector<TrainLogRow>& log) {
  write_csv_row(out, {"episode", "mean_reward", "mean_qoe", "entropy", "critic_loss"});
  for (const auto& r : log)
    write_csv_row(out, {std::to_string(r.episode), format_number(r.mean_reward),
                        format_number(r.mean_qoe), format_number(r.entropy),
                        format_number(r.critic_loss)});
}

void write_eval_csv(std::ostream& out, const std::string& method, const EvalMetrics& m) {
  write_csv_row(out, {"method", "runs", "metric", "mean", "std", "ci95"});
  const std::pair<const char*, const Summary*> rows[] = {
      {"qoe", &m.qoe},          {"latency_s", &m.latency}, {"energy_j", &m.energy},
      {"accuracy", &m.accuracy}, {"reward", &m.reward}};
  for (const auto& [name, s] : rows)
    write_csv_row(out, {method, std::to_string(m.runs), name, format_number(s->mean),
                        format_number(s->std), format_number(s->ci95)});
  write_csv_row(out, {method, std::to_string(m.runs), "offload_fraction",
                      format_number(m.offload_fraction), "", ""});
  write_csv_row(out, {method, std::to_string(m.runs), "conflict_fraction",
                      format_number(m.conflict_fraction), "", ""});
  write_csv_row(out, {method, std::to_string(m.runs), "violation_fraction",
                      format_number(m.violation_fraction), "", ""});
  for (std::size_t i = 0; i < m.agent_qoe.size(); ++i)
    write_csv_row(out, {method, std::to_string(m.runs), "qoe_ue" + std::to_string(i),
                        format_number(m.agent_qoe[i]), "", ""});
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write");
  return out;
}

std::string axis_value(const ResultTable& t, std::size_t point) {
  return format_number(t.points[point].value);
}

}  // namespace

void emit_outputs(const ResultTable& table, const ExperimentSpec& spec,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "logs", ec);
  if (ec) throw std::runtime_error(dir.string() + ": " + ec.message());

  const std::string axis = to_string(table.axis);
  {
    auto out = open_out(dir / "results.csv");
    write_csv_row(out, {"kind", "axis", "point", "label", "axis_value", "method", "seed", "status",
                        "n", "qoe", "qoe_std", "latency_s", "latency_s_std", "energy_j",
                        "energy_j_std", "accuracy", "accuracy_std", "reward", "reward_std",
                        "offload_fraction", "conflict_fraction", "violation_fraction", "error"});
    for (const auto& c : table.cells) {
      const auto& m = c.metrics;
      std::vector<std::string> row = {"cell", axis, std::to_string(c.point),
                                      table.points[c.point].label, axis_value(table, c.point),
                                      to_string(c.method), std::to_string(c.seed),
                                      c.ok ? "ok" : "failed"};
      if (c.ok) {
        for (const auto& s : {std::to_string(m.runs), format_number(m.qoe.mean),
                              format_number(m.qoe.std), format_number(m.latency.mean),
                              format_number(m.latency.std), format_number(m.energy.mean),
                              format_number(m.energy.std), format_number(m.accuracy.mean),
                              format_number(m.accuracy.std), format_number(m.reward.mean),
                              format_number(m.reward.std), format_number(m.offload_fraction),
                              format_number(m.conflict_fraction),
                              format_number(m.violation_fraction)})
          row.push_back(s);
      } else {
        row.resize(row.size() + 14);
      }
      row.push_back(c.error);
      write_csv_row(out, row);
    }
    for (const auto& a : aggregate(table)) {
      std::vector<std::string> row = {"aggregate", axis, std::to_string(a.point),
                                      table.points[a.point].label, axis_value(table, a.point),
                                      to_string(a.method), "", a.seeds > 0 ? "ok" : "failed",
                                      std::to_string(a.seeds)};
      if (a.seeds > 0) {
        for (const Summary* s : {&a.qoe, &a.latency, &a.energy, &a.accuracy, &a.reward}) {
          row.push_back(format_number(s->mean));
          row.push_back(format_number(s->std));
        }
      } else {
        row.resize(row.size() + 10);
      }
      row.resize(row.size() + 4);
      write_csv_row(out, row);
    }
  }

  const auto aggs = aggregate(table);
  const std::pair<const char*, Summary Aggregate::*> metrics[] = {
      {"qoe", &Aggregate::qoe},           {"latency", &Aggregate::latency},
      {"energy", &Aggregate::energy},     {"accuracy", &Aggregate::accuracy},
      {"reward", &Aggregate::reward}};
  for (const auto& [name, member] : metrics) {
    auto out = open_out(dir / (std::string("plot_") + name + ".csv"));
    write_csv_row(out, {"x", "label", "series", "mean", "std", "n"});
    for (const auto& a : aggs) {
      const Summary& s = a.*member;
      write_csv_row(out, {axis_value(table, a.point), table.points[a.point].label,
                          to_string(a.method), a.seeds > 0 ? format_number(s.mean) : "",
                          a.seeds > 0 ? format_number(s.std) : "", std::to_string(a.seeds)});
    }
  }

  for (const auto& c : table.cells) {
    if (c.log.empty()) continue;
    auto out = open_out(dir / "logs" /
                        (to_string(c.method) + "_p" + std::to_string(c.point) + "_s" +
                         std::to_string(c.seed) + ".csv"));
    write_train_log(out, c.log);
  }

  json summary;
  summary["config"] = experiment_to_json(spec);
  summary["cells"] = table.cells.size();
  json failures = json::array();
  for (const auto& c : table.cells)
    if (!c.ok)
      failures.push_back({{"point", c.point}, {"method", to_string(c.method)}, {"seed", c.seed},
                          {"error", c.error}});
  summary["failed"] = failures.size();
  summary["failures"] = failures;
  json rows = json::array();
  for (const auto& a : aggs) {
    json r = {{"point", a.point},
              {"label", table.points[a.point].label},
              {"axis_value", table.points[a.point].value},
              {"method", to_string(a.method)},
              {"seeds", a.seeds}};
    if (a.seeds > 0)
      for (const auto& [name, member] : metrics)
        r[name] = {{"mean", (a.*member).mean}, {"std", (a.*member).std}};
    rows.push_back(r);
  }
  summary["aggregates"] = rows;
  auto out = open_out(dir / "summary.json");
  out << summary.dump(2) << '\n';
}

}  // namespace semmec
