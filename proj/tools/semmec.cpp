// semmec: train, evaluate, sweep and solve frozen instances.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "semmec/config.hpp"
#include "semmec/experiment.hpp"
#include "semmec/oracle.hpp"

namespace fs = std::filesystem;
using namespace semmec;

namespace {

ExperimentSpec spec_from(const std::string& config, const std::optional<std::uint64_t>& seed) {
  ExperimentSpec spec = config.empty() ? parse_config("") : load_config(config);
  if (seed) {
    spec.seeds = {*seed};
    spec.env.seed = *seed;
  }
  return spec;
}

int cmd_train(const std::string& config, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed) {
  const ExperimentSpec spec = spec_from(config, seed);
  fs::create_directories(out_dir);
  int failed = 0;
  for (Method m : spec.methods) {
    for (std::uint64_t s : spec.seeds) {
      const std::string stem = to_string(m) + "_s" + std::to_string(s);
      try {
        std::cerr << "training " << stem << "\n";
        TrainOutput t = train_method(m, spec, spec.env, s, [&](const TrainLogRow& r) {
          if (r.episode % 50 == 0)
            std::cerr << "  episode " << r.episode << " reward " << r.mean_reward << " qoe "
                      << r.mean_qoe << "\n";
        });
        save_checkpoint(t.checkpoint, fs::path(out_dir) / (stem + ".ckpt.json"));
        std::ofstream log(fs::path(out_dir) / (stem + "_log.csv"), std::ios::binary);
        if (!log) throw std::runtime_error("cannot write training log");
        write_train_log(log, t.log);
      } catch (const std::exception& e) {
        std::cerr << "error: " << stem << ": " << e.what() << "\n";
        ++failed;
      }
    }
  }
  return failed == 0 ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint, int runs, std::uint64_t seed, const std::string& config,
             const std::string& out) {
  const Checkpoint c = load_checkpoint(checkpoint);
  const EnvConfig env = config.empty() ? c.env : load_config(config).env;
  const auto policy = make_policy(c, env);
  const EvalMetrics m = evaluate_policy(*policy, EnvModel::build(env), runs, seed);
  if (out.empty()) {
    write_eval_csv(std::cout, to_string(c.method), m);
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error(out + ": cannot write");
    write_eval_csv(f, to_string(c.method), m);
  }
  return 0;
}

int cmd_sweep(const std::string& config, const std::optional<std::uint64_t>& seed,
              const std::string& out, std::optional<int> runs, std::optional<int> workers) {
  ExperimentSpec spec = spec_from(config, seed);
  if (runs) spec.eval_runs = *runs;
  if (workers) spec.workers = *workers;
  if (!out.empty()) spec.out_dir = out;
  spec.validate();
  const ResultTable table = run_experiment(spec, [](const CellResult& c) {
    std::cerr << "cell point " << c.point << " " << to_string(c.method) << " seed " << c.seed
              << ": " << (c.ok ? "qoe " + format_number(c.metrics.qoe.mean) : "failed: " + c.error)
              << "\n";
  });
  emit_outputs(table, spec, spec.out_dir);
  return table.all_ok() ? 0 : 1;
}

int cmd_oracle(const std::string& instance, bool unaware, int threads) {
  const FrozenInstance inst = load_frozen_instance(instance);
  const auto table = DiscreteActionTable::build(inst.config, !unaware);
  const OracleResult r = brute_force_best(inst, table, threads);
  write_csv_row(std::cout, {"ue", "grid_index", "offload", "channel", "p_mw", "f_hz", "mu"});
  for (std::size_t n = 0; n < r.actions.size(); ++n) {
    const AgentAction& a = r.actions[n];
    write_csv_row(std::cout, {std::to_string(n), std::to_string(r.indices[n]),
                              a.offload ? "1" : "0", std::to_string(a.channel),
                              format_number(a.p_w * 1e3), format_number(a.f_hz),
                              format_number(a.mu)});
  }
  std::cerr << "total_qoe " << format_number(r.total_qoe) << " enumerated " << r.enumerated
            << " feasible " << r.feasible_count << "\n";
  std::cout << "total_qoe," << format_number(r.total_qoe) << "\r\n";
  return 0;
}

int cmd_freeze(const std::string& config, std::uint64_t seed, std::optional<int> n_ues,
               const std::string& out) {
  EnvConfig env = config.empty() ? EnvConfig{} : load_config(config).env;
  if (n_ues) env.n_ues = *n_ues;
  save_frozen_instance(FrozenInstance::sample(env, seed), out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-aware multi-task offloading: MAPPO, D3QN, baselines and oracle"};
  app.require_subcommand(1);

  std::string config, out, checkpoint, instance;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs_opt, workers, n_ues;
  int runs = 200, threads = 1;
  std::uint64_t eval_seed = 1000;
  bool unaware = false;

  auto* train = app.add_subcommand("train", "train every configured method and seed");
  train->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--seed", seed, "override the configured seeds");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--runs", runs, "evaluation runs")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--config", config, "evaluate under this config's env")->check(CLI::ExistingFile);
  eval->add_option("--out", out, "CSV output (default stdout)");

  auto* sweep = app.add_subcommand("sweep", "run a configured sweep");
  sweep->add_option("--config", config, "JSON config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--seed", seed, "override the configured seeds");
  sweep->add_option("--out", out, "output directory (overrides experiment.out_dir)");
  sweep->add_option("--runs", runs_opt, "evaluation runs per cell")->check(CLI::PositiveNumber);
  sweep->add_option("--workers", workers, "concurrent cells")->check(CLI::PositiveNumber);

  auto* oracle = app.add_subcommand("oracle", "exhaustive grid search on a frozen instance");
  oracle->add_option("--instance", instance, "frozen instance file")->required()->check(CLI::ExistingFile);
  oracle->add_flag("--unaware", unaware, "restrict the grid to mu = 1");
  oracle->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* freeze = app.add_subcommand("freeze", "write a frozen instance");
  freeze->add_option("--config", config, "JSON config")->check(CLI::ExistingFile);
  freeze->add_option("--seed", eval_seed, "instance seed")->required();
  freeze->add_option("--n-ues", n_ues, "override the UE count")->check(CLI::PositiveNumber);
  freeze->add_option("--out", out, "output file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(config, out, seed);
    if (*eval) return cmd_eval(checkpoint, runs, eval_seed, config, out);
    if (*sweep) return cmd_sweep(config, seed, out, runs_opt, workers);
    if (*oracle) return cmd_oracle(instance, unaware, threads);
    if (*freeze) return cmd_freeze(config, eval_seed, n_ues, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
