#pragma once

#include <span>

namespace semmec {

struct Summary {
  double mean = 0;
  double std = 0;  // sample standard deviation (n - 1)
  double ci95 = 0;  // normal-approximation half width
  std::size_t n = 0;
};

Summary summarize(std::span<const double> xs);

struct MannKendall {
  int s = 0;
  double variance = 0;  // tie-corrected
  double z = 0;         // continuity-corrected
  double p_decreasing = 1;  // one-sided
  double p_increasing = 1;
};

MannKendall mann_kendall(std::span<const double> xs);

double normal_cdf(double z);

}  // namespace semmec
