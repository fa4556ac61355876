#pragma once

// Kalman filter and RTS smoother for the linear-Gaussian state-space model.
// This is the exact-inference oracle the approximate methods are checked
// against; it also returns the log marginal likelihood.
//
// Convention: the state at t = 0 is known exactly (X_0 = config x0 with zero
// covariance) and y_0 observes it, contributing a constant N(y_0; B x0, R)
// term to the evidence. Smoothing therefore runs over t = 1..M-1.

#include "lfhmm/sim/ssm.hpp"

#include <vector>

namespace lfhmm {

struct KalmanResult {
  Matrix filter_means;            // M x K (row 0 = x0)
  std::vector<Matrix> filter_covs;
  Matrix smoother_means;          // M x K (row 0 = x0)
  std::vector<Matrix> smoother_covs;
  double log_likelihood = 0.0;
};

inline KalmanResult kalman_smoother(const SsmConfig& cfg, const ObsSeries& obs) {
  cfg.validate();
  require(obs.obs_dim() == cfg.obs_dim, "kalman_smoother: obs dimension mismatch");
  require(obs.length() == cfg.length, "kalman_smoother: series length mismatch");

  const int m = cfg.length;
  const int k = cfg.state_dim;
  const Matrix q = cfg.sigma_x * cfg.sigma_x * Matrix::Identity(k, k);
  const Matrix r = cfg.sigma_y * cfg.sigma_y * Matrix::Identity(cfg.obs_dim, cfg.obs_dim);
  const Matrix eye = Matrix::Identity(k, k);

  KalmanResult out;
  out.filter_means = Matrix::Zero(m, k);
  out.filter_covs.assign(m, Matrix::Zero(k, k));
  out.filter_means.row(0) = cfg.x0.transpose();

  auto obs_update = [&](const Vector& pred_mean, const Matrix& pred_cov, const Vector& y,
                        Vector& post_mean, Matrix& post_cov) {
    Vector innov = y - cfg.b * pred_mean;
    Matrix s = cfg.b * pred_cov * cfg.b.transpose() + r;
    Eigen::LLT<Matrix> llt(s);
    require(llt.info() == Eigen::Success, "kalman_smoother: innovation covariance not PD");
    Matrix gain = pred_cov * cfg.b.transpose() * llt.solve(Matrix::Identity(s.rows(), s.cols()));
    post_mean = pred_mean + gain * innov;
    post_cov = (eye - gain * cfg.b) * pred_cov;
    // Gaussian innovation log-density via the Cholesky factor.
    Matrix l = llt.matrixL();
    double logdet = 2.0 * l.diagonal().array().log().sum();
    double quad = llt.solve(innov).dot(innov);
    return -0.5 * (quad + logdet + s.rows() * 1.8378770664093454836);  // log 2 pi
  };

  // y_0 term: X_0 is known, so the predictive for y_0 has covariance R.
  out.log_likelihood += detail::gaussian_iso_logpdf(
      obs.observations.row(0).transpose(), cfg.b * cfg.x0, cfg.sigma_y);

  std::vector<Matrix> pred_covs(m, Matrix::Zero(k, k));
  Matrix pred_means(m, k);
  for (int t = 1; t < m; ++t) {
    Vector pm = cfg.a * out.filter_means.row(t - 1).transpose();
    Matrix pc = cfg.a * out.filter_covs[t - 1] * cfg.a.transpose() + q;
    pred_means.row(t) = pm.transpose();
    pred_covs[t] = pc;
    Vector fm;
    Matrix fc;
    out.log_likelihood += obs_update(pm, pc, obs.observations.row(t).transpose(), fm, fc);
    out.filter_means.row(t) = fm.transpose();
    out.filter_covs[t] = fc;
  }

  // RTS backward pass.
  out.smoother_means = out.filter_means;
  out.smoother_covs = out.filter_covs;
  for (int t = m - 2; t >= 1; --t) {
    Eigen::LLT<Matrix> llt(pred_covs[t + 1]);
    Matrix gain = out.filter_covs[t] * cfg.a.transpose() *
                  llt.solve(Matrix::Identity(k, k));
    out.smoother_means.row(t) =
        (out.filter_means.row(t).transpose() +
         gain * (out.smoother_means.row(t + 1).transpose() - pred_means.row(t + 1).transpose()))
            .transpose();
    out.smoother_covs[t] =
        out.filter_covs[t] +
        gain * (out.smoother_covs[t + 1] - pred_covs[t + 1]) * gain.transpose();
  }
  return out;
}

}  // namespace lfhmm
