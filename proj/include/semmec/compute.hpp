#pragma once

// GPU capability, local/server computation latency and energy accounting.

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semmec {

enum class TaskType { Text = 0, Image = 1, Vqa = 2 };
inline constexpr std::size_t kTaskTypeCount = 3;
inline constexpr std::array<TaskType, kTaskTypeCount> kAllTaskTypes = {
    TaskType::Text, TaskType::Image, TaskType::Vqa};

std::string_view to_string(TaskType t);
TaskType task_type_from_string(std::string_view name);

struct ComputeProfile {
  double cuda_cores = 1280;
  double clock_hz = 1.6e9;
  double flops_per_cycle = 2.0;  // alpha_ma
  double energy_coeff = 1e-26;   // kappa

  void validate() const;
};

struct TaskLoad {
  TaskType type = TaskType::Text;
  double data_bits = 0;
  double local_flops = 0;   // l^U
  double se_flops = 0;      // l^SE
  double server_flops = 0;  // l^S
  double local_accuracy = 1.0;

  void validate() const;
};

enum class EsEnergyAttribution { Proportional, Full };

double gpu_capability(double flops_per_cycle, double cores, double clock_hz);
double gpu_capability(const ComputeProfile& profile);

// The mu == 1 branch carries no semantic extraction term.
double local_compute_latency(bool offload, double mu, double l_u, double l_se,
                             double q_exp, double c_n);

// The ES finishes the whole offloaded batch after sum(l^S)/c_s, and
// with proportional sharing that is every offloader's completion time.
double server_latency(std::span<const double> offloaded_server_flops, double c_s);

double task_latency(bool offload, double t_tx, double t_u, double t_s);

// Power in watts.
double ue_energy(double kappa_u, double t_u, double f_hz, double p_w, double t_tx);

double es_energy(double kappa_s, double t_s, double f_s_hz);

// e_s_share is the ES energy already attributed to this UE.
double task_energy(double e_u, double e_s_share);

// Splits E^S across UEs. `server_flops[n]` is zero for UEs that did not
// offload. Proportional mode conserves the total; Full charges every
// offloader the whole E^S.
std::vector<double> attribute_es_energy(double e_s,
                                        std::span<const double> server_flops,
                                        EsEnergyAttribution mode);

}  // namespace semmec
