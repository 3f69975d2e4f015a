#include "semmec/evaluate.hpp"

#include <stdexcept>

namespace semmec {

EvalMetrics evaluate_policy(const Policy& policy, std::shared_ptr<const EnvModel> model, int runs,
                            std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("evaluate_policy: runs must be >= 1");
  const int n = model->config.n_ues;
  Env env(model, seed);
  std::vector<double> qoe, latency, energy, accuracy, reward;
  EvalMetrics m;
  m.runs = runs;
  m.agent_qoe.assign(static_cast<std::size_t>(n), 0.0);
  double tasks = 0, offloads = 0, conflicts = 0, violations = 0;

  for (int r = 0; r < runs; ++r) {
    auto obs = env.reset(derive_seed(seed, static_cast<std::uint64_t>(r)));
    double q = 0, l = 0, e = 0, a = 0, rw = 0, count = 0;
    while (!env.done()) {
      const auto actions = policy.act(env.state(), obs);
      const StepResult res = env.step(actions);
      for (int i = 0; i < n; ++i) {
        const auto& o = res.outcomes[static_cast<std::size_t>(i)];
        const double eq = earned_qoe(o);
        q += eq;
        l += o.latency;
        e += o.energy;
        a += o.accuracy;
        rw += res.rewards[static_cast<std::size_t>(i)];
        m.agent_qoe[static_cast<std::size_t>(i)] += eq;
        offloads += o.offloaded;
        conflicts += o.conflict;
        for (const auto& v : o.violations)
          if (v.constraint == Constraint::Latency || v.constraint == Constraint::Energy ||
              v.constraint == Constraint::Accuracy) {
            violations += 1;
            break;
          }
        count += 1;
      }
      if (!res.done) obs = env.observations();
    }
    qoe.push_back(q / count);
    latency.push_back(l / count);
    energy.push_back(e / count);
    accuracy.push_back(a / count);
    reward.push_back(rw / count);
    tasks += count;
  }
  m.qoe = summarize(qoe);
  m.run_qoe = qoe;
  m.latency = summarize(latency);
  m.energy = summarize(energy);
  m.accuracy = summarize(accuracy);
  m.reward = summarize(reward);
  m.offload_fraction = offloads / tasks;
  m.conflict_fraction = conflicts / tasks;
  m.violation_fraction = violations / tasks;
  for (auto& v : m.agent_qoe) v /= tasks / n;
  return m;
}

}  // namespace semmec
