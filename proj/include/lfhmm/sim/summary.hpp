#pragma once

// Summary statistics for likelihood-free parameter inference: thin the series
// to every factor-th observation and flatten time-major. Keeping raw subsampled
// observations (rather than hand-crafted statistics) is what the sequential
// methods here condition their likelihood estimates on.

#include "lfhmm/core/types.hpp"

namespace lfhmm {

// Keeps observations at indices factor-1, 2*factor-1, ... so a series of
// length M yields floor(M/factor) kept rows; flattening is time-major (all
// components of the first kept time, then the next).
inline Vector summarize(const ObsSeries& y, int factor) {
  require(factor >= 1, "summarize: factor must be >= 1");
  const int m = y.length();
  const int l = y.obs_dim();
  const int kept = m / factor;
  require(kept >= 1, "summarize: factor exceeds series length");
  Vector s(kept * l);
  for (int i = 0; i < kept; ++i)
    s.segment(i * l, l) = y.observations.row((i + 1) * factor - 1).transpose();
  return s;
}

inline int summary_dim(int series_length, int obs_dim, int factor) {
  require(factor >= 1, "summary_dim: factor must be >= 1");
  return (series_length / factor) * obs_dim;
}

}  // namespace lfhmm
