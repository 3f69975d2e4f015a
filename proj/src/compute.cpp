#include "semmec/compute.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace semmec {

std::string_view to_string(TaskType t) {
  switch (t) {
    case TaskType::Text: return "text";
    case TaskType::Image: return "image";
    case TaskType::Vqa: return "vqa";
  }
  return "unknown";
}

TaskType task_type_from_string(std::string_view name) {
  if (name == "text") return TaskType::Text;
  if (name == "image") return TaskType::Image;
  if (name == "vqa") return TaskType::Vqa;
  throw std::invalid_argument("unknown task type '" + std::string(name) + "'");
}

void ComputeProfile::validate() const {
  if (!(cuda_cores > 0) || !(clock_hz > 0) || !(flops_per_cycle > 0) || !(energy_coeff > 0))
    throw std::invalid_argument("ComputeProfile: all fields must be positive");
}

void TaskLoad::validate() const {
  if (!(data_bits > 0) || !(local_flops > 0) || !(se_flops > 0) || !(server_flops > 0))
    throw std::invalid_argument("TaskLoad: loads must be positive");
  if (!(local_accuracy > 0.0 && local_accuracy <= 1.0))
    throw std::invalid_argument("TaskLoad: local accuracy must lie in (0, 1]");
}

double gpu_capability(double flops_per_cycle, double cores, double clock_hz) {
  return flops_per_cycle * cores * clock_hz;
}

double gpu_capability(const ComputeProfile& profile) {
  profile.validate();
  return gpu_capability(profile.flops_per_cycle, profile.cuda_cores, profile.clock_hz);
}

double local_compute_latency(bool offload, double mu, double l_u, double l_se,
                             double q_exp, double c_n) {
  if (!(c_n > 0.0)) throw std::invalid_argument("local_compute_latency: capability must be positive");
  if (!(mu > 0.0 && mu <= 1.0)) throw std::invalid_argument("local_compute_latency: mu outside (0, 1]");
  const double rho = offload ? 1.0 : 0.0;
  const double local = (1.0 - rho) * l_u / c_n;
  if (mu == 1.0) return local;
  return local + rho * l_se / (std::pow(mu, q_exp) * c_n);
}

double server_latency(std::span<const double> offloaded_server_flops, double c_s) {
  if (!(c_s > 0.0)) throw std::invalid_argument("server_latency: capability must be positive");
  const double total = std::accumulate(offloaded_server_flops.begin(),
                                       offloaded_server_flops.end(), 0.0);
  return total / c_s;
}

double task_latency(bool offload, double t_tx, double t_u, double t_s) {
  const double rho = offload ? 1.0 : 0.0;
  return rho * (t_tx + t_s) + t_u;
}

double ue_energy(double kappa_u, double t_u, double f_hz, double p_w, double t_tx) {
  return kappa_u * t_u * f_hz * f_hz * f_hz + p_w * t_tx;
}

double es_energy(double kappa_s, double t_s, double f_s_hz) {
  return kappa_s * t_s * f_s_hz * f_s_hz * f_s_hz;
}

double task_energy(double e_u, double e_s_share) { return e_u + e_s_share; }

std::vector<double> attribute_es_energy(double e_s,
                                        std::span<const double> server_flops,
                                        EsEnergyAttribution mode) {
  std::vector<double> share(server_flops.size(), 0.0);
  const double total = std::accumulate(server_flops.begin(), server_flops.end(), 0.0);
  if (total <= 0.0) return share;
  for (std::size_t n = 0; n < server_flops.size(); ++n) {
    if (server_flops[n] <= 0.0) continue;
    share[n] = mode == EsEnergyAttribution::Full ? e_s : e_s * (server_flops[n] / total);
  }
  return share;
}

}  // namespace semmec
