#include "semmec/accuracy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace semmec {
namespace {

constexpr double kAccuracyFloor = 1e-12;

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Index i such that grid[i] <= x <= grid[i+1] plus the interpolation weight,
// clamping outside the grid.
std::pair<std::size_t, double> bracket(const std::vector<double>& grid, double x) {
  if (grid.size() == 1 || x <= grid.front()) return {0, 0.0};
  if (x >= grid.back()) return {grid.size() - 2, 1.0};
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid.begin()) - 1;
  return {i, (x - grid[i]) / (grid[i + 1] - grid[i])};
}

}  // namespace

void AccuracyProfile::validate() const {
  if (!(eps_max > 0.0 && eps_max <= 1.0))
    throw std::invalid_argument("AccuracyProfile: eps_max must lie in (0, 1]");
  if (!(mu_shape >= 0.0 && mu_shape < 1.0))
    throw std::invalid_argument("AccuracyProfile: mu_shape must lie in [0, 1)");
  if (!(mu_scale > 0.0)) throw std::invalid_argument("AccuracyProfile: mu_scale must be positive");
  if (!(snr_steepness > 0.0))
    throw std::invalid_argument("AccuracyProfile: snr_steepness must be positive");
}

double AccuracyProfile::ceiling() const {
  return eps_max * (1.0 - mu_shape * std::exp(-mu_scale));
}

double AccuracyTable::at(double mu_q, double snr_db_q) const {
  const auto [i, a] = bracket(mu, mu_q);
  const auto [j, b] = bracket(snr_db, snr_db_q);
  const std::size_t m = snr_db.size();
  auto v = [&](std::size_t r, std::size_t c) { return values[r * m + c]; };
  const std::size_t i1 = mu.size() == 1 ? i : i + 1;
  const std::size_t j1 = m == 1 ? j : j + 1;
  return (1 - a) * (1 - b) * v(i, j) + (1 - a) * b * v(i, j1) + a * (1 - b) * v(i1, j) +
         a * b * v(i1, j1);
}

void AccuracyTable::validate() const {
  if (mu.empty() || snr_db.empty()) throw std::invalid_argument("AccuracyTable: empty grid");
  if (values.size() != mu.size() * snr_db.size())
    throw std::invalid_argument("AccuracyTable: grid is not rectangular");
  if (!std::is_sorted(mu.begin(), mu.end()) || !std::is_sorted(snr_db.begin(), snr_db.end()))
    throw std::invalid_argument("AccuracyTable: axes must be ascending");
  for (double v : values)
    if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("AccuracyTable: accuracy outside (0, 1]");
}

AccuracyModel::AccuracyModel(std::array<AccuracyProfile, kTaskTypeCount> profiles)
    : model_(profiles) {
  for (const auto& p : profiles) p.validate();
}

AccuracyModel::AccuracyModel(std::array<AccuracyTable, kTaskTypeCount> tables)
    : model_(std::move(tables)) {
  for (const auto& t : std::get<Tables>(model_)) t.validate();
}

const AccuracyProfile& AccuracyModel::profile(TaskType type) const {
  if (is_table()) throw std::logic_error("AccuracyModel: table-driven model has no profile");
  return std::get<Profiles>(model_)[static_cast<std::size_t>(type)];
}

double AccuracyModel::offloaded(TaskType type, double mu, double snr) const {
  const auto idx = static_cast<std::size_t>(type);
  if (const auto* profiles = std::get_if<Profiles>(&model_))
    return parametric_accuracy((*profiles)[idx], mu, snr);
  const auto& table = std::get<Tables>(model_)[idx];
  const double snr_db = 10.0 * std::log10(snr);
  return std::clamp(table.at(mu, snr_db), kAccuracyFloor, 1.0);
}

double parametric_accuracy(const AccuracyProfile& profile, double mu, double snr) {
  const double mu_term = 1.0 - profile.mu_shape * std::exp(-profile.mu_scale * mu);
  const double snr_db = 10.0 * std::log10(snr);
  const double snr_term =
      logistic(profile.snr_steepness * (snr_db - profile.snr_midpoint_db));
  return std::clamp(profile.eps_max * mu_term * snr_term, kAccuracyFloor, profile.eps_max);
}

double task_accuracy(const AccuracyModel& model, TaskType type, double mu,
                     double snr, bool offloaded, double local_accuracy,
                     double mu_min) {
  if (!(mu >= mu_min && mu <= 1.0))
    throw std::invalid_argument("task_accuracy: mu outside [mu_min, 1]");
  if (snr < 0.0) throw std::invalid_argument("task_accuracy: negative SNR");
  if (!offloaded) return local_accuracy;
  return model.offloaded(type, mu, snr);
}

CalibratedProfile calibrate_profile(double target, const AccuracyShape& shape,
                                    double local_margin) {
  if (!(target > 0.0 && target < 1.0))
    throw std::invalid_argument("calibrate_profile: target must lie in (0, 1)");
  const double mu_term = 1.0 - shape.mu_shape * std::exp(-shape.mu_scale);
  if (!(mu_term > 0.0))
    throw std::invalid_argument("calibrate_profile: shape leaves no accuracy at mu = 1");
  CalibratedProfile out;
  out.profile = AccuracyProfile{target / mu_term, shape.mu_shape, shape.mu_scale,
                                shape.snr_midpoint_db, shape.snr_steepness};
  if (out.profile.eps_max > 1.0)
    throw std::invalid_argument("calibrate_profile: target " + std::to_string(target) +
                                " unreachable with mu_shape/mu_scale (needs eps_max > 1)");
  out.profile.validate();
  out.local_accuracy = std::min(1.0, target + local_margin);
  return out;
}

std::array<CalibratedProfile, kTaskTypeCount> calibrate_profiles(
    const std::array<double, kTaskTypeCount>& targets, const AccuracyShape& shape,
    double local_margin) {
  std::array<CalibratedProfile, kTaskTypeCount> out;
  for (std::size_t i = 0; i < kTaskTypeCount; ++i)
    out[i] = calibrate_profile(targets[i], shape, local_margin);
  return out;
}

AccuracyModel load_accuracy_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("accuracy table: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "task_type,mu,snr_db,accuracy")
    throw std::invalid_argument("accuracy table: expected header task_type,mu,snr_db,accuracy");

  std::array<std::map<std::pair<double, double>, double>, kTaskTypeCount> points;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string type, mu, snr, acc;
    if (!std::getline(ss, type, ',') || !std::getline(ss, mu, ',') ||
        !std::getline(ss, snr, ',') || !std::getline(ss, acc))
      throw std::invalid_argument("accuracy table: malformed line " + std::to_string(line_no));
    const auto idx = static_cast<std::size_t>(task_type_from_string(type));
    points[idx][{std::stod(mu), std::stod(snr)}] = std::stod(acc);
  }

  std::array<AccuracyTable, kTaskTypeCount> tables;
  for (std::size_t t = 0; t < kTaskTypeCount; ++t) {
    auto& table = tables[t];
    for (const auto& [key, value] : points[t]) {
      if (table.mu.empty() || table.mu.back() != key.first) table.mu.push_back(key.first);
      if (std::find(table.snr_db.begin(), table.snr_db.end(), key.second) == table.snr_db.end())
        table.snr_db.push_back(key.second);
    }
    std::sort(table.snr_db.begin(), table.snr_db.end());
    for (double m : table.mu)
      for (double s : table.snr_db) {
        const auto it = points[t].find({m, s});
        if (it == points[t].end())
          throw std::invalid_argument("accuracy table: missing grid point for " +
                                      std::string(to_string(static_cast<TaskType>(t))));
        table.values.push_back(it->second);
      }
  }
  return AccuracyModel(std::move(tables));
}

AccuracyModel load_accuracy_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open accuracy table '" + path + "'");
  return load_accuracy_table(in);
}

}  // namespace semmec
