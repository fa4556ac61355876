#include "lfhmm/core/simulate.hpp"
#include "lfhmm/sim/kalman.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace lfhmm;

namespace {

// Brute-force posterior for K=1, M=3 (latents X1, X2) on a midpoint grid.
struct GridPosterior {
  double mean1, var1, mean2, var2, loglik;
};

GridPosterior grid_posterior(const SsmConfig& cfg, const ObsSeries& obs, double lo,
                             double hi, int n) {
  const double a = cfg.a(0, 0), b = cfg.b(0, 0);
  const double q = cfg.sigma_x * cfg.sigma_x, r = cfg.sigma_y * cfg.sigma_y;
  const double x0 = cfg.x0[0];
  const double y0 = obs.observations(0, 0), y1 = obs.observations(1, 0),
               y2 = obs.observations(2, 0);
  const double h = (hi - lo) / n;

  auto log_n = [](double x, double m, double v) {
    return -0.5 * (x - m) * (x - m) / v - 0.5 * std::log(2.0 * M_PI * v);
  };

  double z = 0.0, m1 = 0.0, m2 = 0.0, s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x1 = lo + (i + 0.5) * h;
    const double base = log_n(x1, a * x0, q) + log_n(y1, b * x1, r);
    for (int j = 0; j < n; ++j) {
      const double x2 = lo + (j + 0.5) * h;
      const double w = std::exp(base + log_n(x2, a * x1, q) + log_n(y2, b * x2, r));
      z += w;
      m1 += w * x1;
      m2 += w * x2;
      s1 += w * x1 * x1;
      s2 += w * x2 * x2;
    }
  }
  GridPosterior g;
  g.mean1 = m1 / z;
  g.mean2 = m2 / z;
  g.var1 = s1 / z - g.mean1 * g.mean1;
  g.var2 = s2 / z - g.mean2 * g.mean2;
  g.loglik = std::log(z * h * h) + log_n(y0, b * x0, r);
  return g;
}

}  // namespace

TEST_CASE("smoother matches a dense-grid posterior for a 3-step scalar model") {
  SsmConfig cfg = SsmConfig::standard(1, 1, 3, 0.5, 0.5);
  cfg.x0[0] = 0.5;
  auto model = linear_gaussian_model(cfg);
  RngStream rng(2718, 0);
  auto [path, obs] = simulate_joint(*model, model->make_params(Vector(0)), rng);

  GridPosterior g = grid_posterior(cfg, obs, -5.0, 5.0, 1200);
  KalmanResult kr = kalman_smoother(cfg, obs);

  REQUIRE(kr.smoother_means(1, 0) == Catch::Approx(g.mean1).margin(1e-4));
  REQUIRE(kr.smoother_means(2, 0) == Catch::Approx(g.mean2).margin(1e-4));
  REQUIRE(kr.smoother_covs[1](0, 0) == Catch::Approx(g.var1).margin(1e-4));
  REQUIRE(kr.smoother_covs[2](0, 0) == Catch::Approx(g.var2).margin(1e-4));
  REQUIRE(kr.log_likelihood == Catch::Approx(g.loglik).margin(1e-4));
}

TEST_CASE("one-step filter update matches the conjugate formula") {
  SsmConfig cfg = SsmConfig::standard(1, 1, 2, 0.4, 0.6);
  cfg.x0[0] = 1.0;
  cfg.b(0, 0) = 2.0;
  Vector t(2);
  t << 0.0, 1.0;
  Matrix y(2, 1);
  y << 2.1, 1.3;
  KalmanResult kr = kalman_smoother(cfg, ObsSeries(y, t));

  const double q = 0.16, r = 0.36, a = 0.9, b = 2.0;
  const double prec = 1.0 / q + b * b / r;
  const double var = 1.0 / prec;
  const double mean = var * (a * 1.0 / q + b * 1.3 / r);
  REQUIRE(kr.filter_means(1, 0) == Catch::Approx(mean).margin(1e-12));
  REQUIRE(kr.filter_covs[1](0, 0) == Catch::Approx(var).margin(1e-12));
  // With M=2 the final smoothed marginal equals the final filtered one.
  REQUIRE(kr.smoother_means(1, 0) == Catch::Approx(mean).margin(1e-12));
}

TEST_CASE("smoothing never inflates the filtered variance") {
  SsmConfig cfg = SsmConfig::standard(3, 2, 40, 0.5, 0.5);
  cfg.b = Matrix::Zero(2, 3);
  cfg.b(0, 0) = 2.0;
  cfg.b(1, 1) = 1.0;
  cfg.b(1, 2) = -1.0;
  auto model = linear_gaussian_model(cfg);
  RngStream rng(31337, 0);
  auto [path, obs] = simulate_joint(*model, model->make_params(Vector(0)), rng);
  KalmanResult kr = kalman_smoother(cfg, obs);
  for (int t = 1; t < 40; ++t) {
    for (int k = 0; k < 3; ++k) {
      REQUIRE(kr.smoother_covs[t](k, k) <= kr.filter_covs[t](k, k) + 1e-10);
      REQUIRE(kr.smoother_covs[t](k, k) > 0.0);
    }
  }
  REQUIRE(std::isfinite(kr.log_likelihood));
  // Final marginals agree by construction.
  REQUIRE((kr.smoother_means.row(39) - kr.filter_means.row(39)).norm() < 1e-12);
}

TEST_CASE("smoother tracks the truth better than the prior mean path") {
  SsmConfig cfg = SsmConfig::standard(1, 1, 50, 0.5, 0.5);
  auto model = linear_gaussian_model(cfg);
  RngStream rng(77, 1);
  auto [path, obs] = simulate_joint(*model, model->make_params(Vector(0)), rng);
  KalmanResult kr = kalman_smoother(cfg, obs);
  double err_smooth = 0.0, err_prior = 0.0;
  for (int t = 1; t < 50; ++t) {
    err_smooth += std::pow(kr.smoother_means(t, 0) - path.states(t, 0), 2);
    err_prior += std::pow(path.states(t, 0), 2);  // prior mean decays to 0 fast
  }
  REQUIRE(err_smooth < err_prior);
}
