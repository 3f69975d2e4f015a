#pragma once

// Stand-in for trained semantic codecs: maps (task type, mu, SNR) to task
// accuracy. Either a parametric profile per task type or a measured
// (mu, SNR) grid loaded from CSV.

#include <array>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "semmec/compute.hpp"

namespace semmec {

// eps_max * (1 - mu_shape * exp(-mu_scale * mu)) * logistic(steepness * (snr_dB - midpoint))
struct AccuracyProfile {
  double eps_max = 0.9;
  double mu_shape = 0.3;
  double mu_scale = 5.0;
  double snr_midpoint_db = 0.0;
  double snr_steepness = 0.5;

  void validate() const;
  // Accuracy at mu = 1 and infinite SNR.
  double ceiling() const;
};

// Shape parameters shared by calibration; eps_max is solved for.
struct AccuracyShape {
  double mu_shape = 0.3;
  double mu_scale = 5.0;
  double snr_midpoint_db = 0.0;
  double snr_steepness = 0.5;
};

struct CalibratedProfile {
  AccuracyProfile profile;
  double local_accuracy = 0.0;
};

// Bilinear table over (mu, snr_dB); queries outside the grid are clamped.
struct AccuracyTable {
  std::vector<double> mu;
  std::vector<double> snr_db;
  std::vector<double> values;  // mu-major: values[i * snr_db.size() + j]

  double at(double mu_q, double snr_db_q) const;
  void validate() const;
};

class AccuracyModel {
 public:
  explicit AccuracyModel(std::array<AccuracyProfile, kTaskTypeCount> profiles);
  explicit AccuracyModel(std::array<AccuracyTable, kTaskTypeCount> tables);

  // Accuracy of an offloaded task; `snr` is linear.
  double offloaded(TaskType type, double mu, double snr) const;

  bool is_table() const { return std::holds_alternative<Tables>(model_); }
  const AccuracyProfile& profile(TaskType type) const;

 private:
  using Profiles = std::array<AccuracyProfile, kTaskTypeCount>;
  using Tables = std::array<AccuracyTable, kTaskTypeCount>;
  std::variant<Profiles, Tables> model_;
};

double parametric_accuracy(const AccuracyProfile& profile, double mu, double snr);

// Local execution bypasses the channel and returns `local_accuracy` as is.
double task_accuracy(const AccuracyModel& model, TaskType type, double mu,
                     double snr, bool offloaded, double local_accuracy,
                     double mu_min);

CalibratedProfile calibrate_profile(double target, const AccuracyShape& shape,
                                    double local_margin);

std::array<CalibratedProfile, kTaskTypeCount> calibrate_profiles(
    const std::array<double, kTaskTypeCount>& targets, const AccuracyShape& shape,
    double local_margin);

// CSV with header `task_type,mu,snr_db,accuracy`; every task type must
// provide a full rectangular grid.
AccuracyModel load_accuracy_table(std::istream& in);
AccuracyModel load_accuracy_table(const std::string& path);

}  // namespace semmec
