#include "semmec/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace semmec {

Summary summarize(std::span<const double> xs) {
  Summary s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double acc = 0.0;
  for (double x : xs) acc += x;
  s.mean = acc / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.ci95 = 1.959963984540054 * s.std / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MannKendall mann_kendall(std::span<const double> xs) {
  if (xs.size() < 3) throw std::invalid_argument("mann_kendall: need at least 3 points");
  MannKendall mk;
  const std::size_t n = xs.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) mk.s += (xs[j] > xs[i]) - (xs[j] < xs[i]);

  std::map<double, int> groups;
  for (double x : xs) ++groups[x];
  const double nd = static_cast<double>(n);
  mk.variance = nd * (nd - 1) * (2 * nd + 5);
  for (const auto& [value, t] : groups) mk.variance -= static_cast<double>(t) * (t - 1) * (2 * t + 5);
  mk.variance /= 18.0;

  if (mk.variance > 0.0) {
    if (mk.s > 0) mk.z = (mk.s - 1) / std::sqrt(mk.variance);
    if (mk.s < 0) mk.z = (mk.s + 1) / std::sqrt(mk.variance);
  }
  mk.p_decreasing = normal_cdf(mk.z);
  mk.p_increasing = 1.0 - normal_cdf(mk.z);
  return mk;
}

}  // namespace semmec
