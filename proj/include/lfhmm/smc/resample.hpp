#pragma once

// Systematic resampling: one uniform offset, P evenly spaced points through
// the weight CDF. Low-variance and cheap; the standard choice for particle
// filters.

#include "lfhmm/core/rng.hpp"
#include "lfhmm/core/types.hpp"

#include <vector>

namespace lfhmm {

inline std::vector<int> systematic_resample(const Vector& weights, int n, RngStream& rng) {
  require(n >= 1, "systematic_resample: n must be >= 1");
  require(weights.size() >= 1, "systematic_resample: empty weights");
  double total = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    require(weights[i] >= 0.0, "systematic_resample: negative weight");
    total += weights[i];
  }
  require(total > 0.0, "systematic_resample: weights sum to zero");

  std::vector<int> ancestors(n);
  const double step = total / n;
  double u = rng.uniform01() * step;
  double cum = weights[0];
  int i = 0;
  for (int k = 0; k < n; ++k) {
    while (u > cum && i + 1 < weights.size()) cum += weights[++i];
    ancestors[k] = i;
    u += step;
  }
  return ancestors;
}

}  // namespace lfhmm
