#pragma once

// Evaluation metrics shared by the experiment pipeline and the test suites:
// cellwise MSE of the posterior mean, central-interval empirical coverage,
// coefficient of variation, plus ESS / quantile / KS helpers.

#include "lfhmm/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace lfhmm {

// Linear-interpolation quantile (type 7): index h = (n-1) p into the sorted
// array, interpolating between floor(h) and ceil(h).
inline double quantile_type7(std::vector<double> values, double p) {
  require(!values.empty(), "quantile_type7: empty sample");
  require(p >= 0.0 && p <= 1.0, "quantile_type7: p must be in [0,1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

// Mean squared error of the sample mean against the truth, averaged over all
// cells (time points x dimensions).
inline double mse(const Matrix& truth, const std::vector<Matrix>& samples) {
  require(!samples.empty(), "mse: no samples");
  Matrix mean = Matrix::Zero(truth.rows(), truth.cols());
  for (const Matrix& s : samples) {
    require(s.rows() == truth.rows() && s.cols() == truth.cols(), "mse: shape mismatch");
    mean += s;
  }
  mean /= static_cast<double>(samples.size());
  return (mean - truth).array().square().mean();
}

inline double mse(const Vector& truth, const std::vector<Vector>& samples) {
  std::vector<Matrix> ms;
  ms.reserve(samples.size());
  for (const Vector& s : samples) ms.emplace_back(s);
  return mse(Matrix(truth), ms);
}

// Fraction of cells whose truth lies inside the equal-tailed central interval
// of the given level, using type-7 sample quantiles per cell. Needs enough
// samples for the tail quantiles to mean anything.
inline double empirical_coverage(const Matrix& truth, const std::vector<Matrix>& samples,
                                 double level = 0.9) {
  require(level > 0.0 && level < 1.0, "empirical_coverage: level must be in (0,1)");
  require(samples.size() >= 20, "empirical_coverage: need at least 20 samples");
  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 1.0 - lo_p;
  int covered = 0;
  const int cells = static_cast<int>(truth.rows() * truth.cols());
  std::vector<double> cell(samples.size());
  for (int r = 0; r < truth.rows(); ++r) {
    for (int c = 0; c < truth.cols(); ++c) {
      for (std::size_t s = 0; s < samples.size(); ++s) {
        require(samples[s].rows() == truth.rows() && samples[s].cols() == truth.cols(),
                "empirical_coverage: shape mismatch");
        cell[s] = samples[s](r, c);
      }
      const double lo = quantile_type7(cell, lo_p);
      const double hi = quantile_type7(cell, hi_p);
      if (truth(r, c) >= lo && truth(r, c) <= hi) ++covered;
    }
  }
  return static_cast<double>(covered) / static_cast<double>(cells);
}

inline double empirical_coverage(const Vector& truth, const std::vector<Vector>& samples,
                                 double level = 0.9) {
  std::vector<Matrix> ms;
  ms.reserve(samples.size());
  for (const Vector& s : samples) ms.emplace_back(s);
  return empirical_coverage(Matrix(truth), ms, level);
}

struct CvResult {
  double value = 0.0;
  int excluded_cells = 0;  // cells skipped because |mean| was below threshold
};

// Mean over cells of std/|mean| (sample std, ddof 1). Cells whose mean is
// numerically zero are excluded from the average and counted, since the ratio
// is meaningless there.
inline CvResult coefficient_of_variation(const std::vector<Matrix>& samples,
                                         double mean_floor = 1e-8) {
  require(samples.size() >= 2, "coefficient_of_variation: need at least 2 samples");
  const auto rows = samples[0].rows();
  const auto cols = samples[0].cols();
  const double n = static_cast<double>(samples.size());
  CvResult out;
  double acc = 0.0;
  int used = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      double mean = 0.0;
      for (const Matrix& s : samples) {
        require(s.rows() == rows && s.cols() == cols, "coefficient_of_variation: shape mismatch");
        mean += s(r, c);
      }
      mean /= n;
      double ss = 0.0;
      for (const Matrix& s : samples) {
        const double d = s(r, c) - mean;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / (n - 1.0));
      if (std::abs(mean) < mean_floor) {
        ++out.excluded_cells;
        continue;
      }
      acc += sd / std::abs(mean);
      ++used;
    }
  }
  require(used > 0, "coefficient_of_variation: all cells excluded");
  out.value = acc / static_cast<double>(used);
  return out;
}

inline CvResult coefficient_of_variation(const std::vector<Vector>& samples,
                                         double mean_floor = 1e-8) {
  std::vector<Matrix> ms;
  ms.reserve(samples.size());
  for (const Vector& s : samples) ms.emplace_back(s);
  return coefficient_of_variation(ms, mean_floor);
}

// Effective sample size of a normalised weight vector, 1 / sum w^2.
inline double effective_sample_size(const Vector& weights) {
  double s2 = weights.squaredNorm();
  require(s2 > 0.0, "effective_sample_size: all-zero weights");
  return 1.0 / s2;
}

// One-sample Kolmogorov-Smirnov statistic against a reference CDF.
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  require(!samples.empty(), "ks_statistic: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(std::abs(f - lo), std::abs(hi - f)));
  }
  return d;
}

// Asymptotic Kolmogorov distribution tail probability with the small-sample
// correction from Stephens (1970).
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * lambda * lambda * k * k);
    p += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-12) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

}  // namespace lfhmm
