#include "lfhmm/core/rng.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

using lfhmm::RngStream;

namespace {

double erf_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("same seed and stream reproduce the identical sequence") {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct stream ids give distinct sequences") {
  RngStream a(42, 0);
  RngStream b(42, 1);
  int differing = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() != b.next_u64()) ++differing;
  REQUIRE(differing == 64);
}

TEST_CASE("derive is stable and independent of parent consumption") {
  RngStream parent(123, 5);
  RngStream child_before = parent.derive(3);
  for (int i = 0; i < 100; ++i) parent.next_u64();
  RngStream child_after = parent.derive(3);
  for (int i = 0; i < 100; ++i)
    REQUIRE(child_before.next_u64() == child_after.next_u64());

  REQUIRE(parent.derive("train").stream_id() == parent.derive("train").stream_id());
  REQUIRE(parent.derive("train").stream_id() != parent.derive("mcmc").stream_id());
}

TEST_CASE("uniform01 stays inside the open unit interval") {
  RngStream rng(9, 0);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.uniform01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("uniform01 passes a KS test against U(0,1)") {
  RngStream rng(2024, 11);
  std::vector<double> xs(20000);
  for (double& x : xs) x = rng.uniform01();
  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d = std::max(d, std::abs(xs[i] - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - xs[i]));
  }
  // Critical value at alpha = 1e-4 is about 1.95 / sqrt(n).
  REQUIRE(d < 1.95 / std::sqrt(n));
}

TEST_CASE("normal draws match N(0,1) moments and CDF") {
  RngStream rng(77, 3);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = rng.normal();
    sum += xs[i];
    sumsq += xs[i] * xs[i];
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  REQUIRE(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  REQUIRE(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));

  std::sort(xs.begin(), xs.end());
  double d = 0.0;
  for (int i = 0; i < n; i += 37)  // subsample; full scan is slow under REQUIRE
    d = std::max(d, std::abs(erf_cdf(xs[i]) - static_cast<double>(i) / n));
  REQUIRE(d < 0.01);
}

TEST_CASE("gamma draws match analytic moments for both shape regimes") {
  RngStream rng(5, 1);
  const int n = 100000;

  // shape 2, rate 3: mean 2/3, variance 2/9.
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.gamma(2.0, 3.0);
  double se = std::sqrt(2.0 / 9.0 / n);
  REQUIRE(std::abs(sum / n - 2.0 / 3.0) < 4.0 * se);

  // shape 0.5 exercises the boost branch: mean 0.5, variance 0.5.
  sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.gamma(0.5, 1.0);
  se = std::sqrt(0.5 / n);
  REQUIRE(std::abs(sum / n - 0.5) < 4.0 * se);
}

TEST_CASE("beta draws match analytic moments") {
  RngStream rng(6, 2);
  const int n = 100000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.beta(1.0, 2.0);
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    sum += x;
    sumsq += x * x;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // Beta(1,2): mean 1/3, variance 1/18.
  REQUIRE(std::abs(mean - 1.0 / 3.0) < 4.0 * std::sqrt(1.0 / 18.0 / n));
  REQUIRE(std::abs(var - 1.0 / 18.0) < 0.01);
}

TEST_CASE("exponential draws match the analytic mean") {
  RngStream rng(8, 4);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += rng.exponential(2.0);
  REQUIRE(std::abs(sum / n - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
  REQUIRE_THROWS_AS(rng.exponential(0.0), std::invalid_argument);
}
