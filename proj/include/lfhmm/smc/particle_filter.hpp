#pragma once

// Particle filtering for implicit HMMs. bootstrap_filter proposes from the
// model transition and weights by the observation density (works for any
// simulator); guided_filter uses the conditionally optimal Gaussian proposal
// available for the additive-Gaussian state-space models. Both resample
// systematically when ESS drops below P/2, report per-step ESS and an unbiased
// log-evidence estimate, and can return smoothed path samples traced through
// the resampling genealogy.
//
// prdyn_sample is the no-data baseline: ancestral sampling from the prior
// dynamics, ignoring observations entirely.

#include "lfhmm/core/model.hpp"
#include "lfhmm/core/simulate.hpp"
#include "lfhmm/metrics/metrics.hpp"
#include "lfhmm/sim/ssm.hpp"
#include "lfhmm/smc/resample.hpp"

#include <cmath>
#include <utility>
#include <vector>

namespace lfhmm {

struct ParticleCloud {
  Matrix particles;   // P x K
  Vector log_weights; // unnormalised
  Vector weights;     // normalised

  int size() const { return static_cast<int>(particles.rows()); }
};

struct FilterResult {
  double log_evidence = 0.0;
  Vector ess;         // per step t = 1..M-1, after weighting, before resampling
  int resample_count = 0;
  std::vector<StatePath> paths;  // genealogy-traced posterior path draws
};

namespace smc_detail {

inline void normalize_log_weights(const Vector& lw, Vector& w) {
  const double m = lw.maxCoeff();
  require(std::isfinite(m), "particle filter: all weights collapsed to zero");
  w = (lw.array() - m).exp();
  w /= w.sum();
}

struct History {
  bool enabled = false;
  std::vector<Matrix> particles;       // per step
  std::vector<std::vector<int>> ancestors;  // per step (identity if no resample)
};

// Shared filter skeleton: propagate() fills the new particle matrix, and
// step_log_weight() returns each particle's incremental log weight.
template <typename Propagate, typename StepLogWeight>
FilterResult run_filter(const ImplicitHmm& model, const ParamVector& theta,
                        const ObsSeries& y, int p_count, RngStream& rng, int n_paths,
                        Propagate&& propagate, StepLogWeight&& step_log_weight) {
  const int m = model.length();
  const int k = model.state_dim();
  require(y.length() == m, "particle filter: series length mismatch");
  require(p_count >= 2, "particle filter: need at least 2 particles");

  FilterResult out;
  out.ess = Vector::Zero(m - 1);
  History hist;
  hist.enabled = n_paths > 0;

  Matrix x = model.initial_state(theta).transpose().replicate(p_count, 1);
  Vector lw = Vector::Zero(p_count);
  Vector w = Vector::Constant(p_count, 1.0 / p_count);

  // y_0 observes the known initial state: a constant factor in the evidence.
  out.log_evidence +=
      model.log_obs_density(y.observations.row(0).transpose(), x.row(0).transpose(), theta, 0);

  Matrix x_new(p_count, k);
  Vector lg(p_count);
  for (int t = 1; t < m; ++t) {
    RngStream step_rng = rng.derive(static_cast<std::uint64_t>(t));
    propagate(x, x_new, theta, t, step_rng);
    step_log_weight(x, x_new, theta, t, lg);

    // Predictive-likelihood increment under the current normalised weights.
    const double shift = lg.maxCoeff();
    require(std::isfinite(shift), "particle filter: degenerate step weights");
    out.log_evidence += shift + std::log(w.dot((lg.array() - shift).exp().matrix()));

    lw += lg;
    smc_detail::normalize_log_weights(lw, w);
    out.ess[t - 1] = effective_sample_size(w);

    x.swap(x_new);
    if (hist.enabled) hist.particles.push_back(x);

    if (out.ess[t - 1] < 0.5 * p_count) {
      RngStream res_rng = step_rng.derive("resample");
      std::vector<int> anc = systematic_resample(w, p_count, res_rng);
      Matrix resampled(p_count, k);
      for (int p = 0; p < p_count; ++p) resampled.row(p) = x.row(anc[p]);
      x = std::move(resampled);
      lw.setZero();
      w.setConstant(1.0 / p_count);
      ++out.resample_count;
      if (hist.enabled) hist.ancestors.push_back(std::move(anc));
    } else if (hist.enabled) {
      std::vector<int> identity(p_count);
      for (int p = 0; p < p_count; ++p) identity[p] = p;
      hist.ancestors.push_back(std::move(identity));
    }
  }

  if (hist.enabled) {
    // hist.particles[s] holds the pre-resampling particles of time s+1 and
    // hist.ancestors[s] maps post-resampling indices at time s+1 (the ones the
    // next step and the final weights refer to) back to pre-resampling rows.
    RngStream path_rng = rng.derive("paths");
    for (int draw = 0; draw < n_paths; ++draw) {
      // Sample a terminal index by weight, then walk the genealogy backwards.
      double u = path_rng.uniform01();
      int idx = 0;
      double cum = w[0];
      while (u > cum && idx + 1 < p_count) cum += w[++idx];

      Matrix states(m, k);
      states.row(0) = model.initial_state(theta).transpose();
      for (int s = m - 2; s >= 0; --s) {
        idx = hist.ancestors[s][idx];
        states.row(s + 1) = hist.particles[s].row(idx);
      }
      out.paths.emplace_back(std::move(states), model.times());
    }
  }
  return out;
}

}  // namespace smc_detail

inline FilterResult bootstrap_filter(const ImplicitHmm& model, const ParamVector& theta,
                                     const ObsSeries& y, int p_count, RngStream& rng,
                                     int n_paths = 0) {
  require(model.has_obs_density(), "bootstrap_filter: model lacks an observation density");
  auto propagate = [&model](const Matrix& x, Matrix& x_new, const ParamVector& th, int t,
                            RngStream& step_rng) {
    for (int p = 0; p < x.rows(); ++p) {
      RngStream prng = step_rng.derive(static_cast<std::uint64_t>(p));
      x_new.row(p) = model.transition(x.row(p).transpose(), th, t, prng).transpose();
    }
  };
  auto weight = [&model, &y](const Matrix&, const Matrix& x_new, const ParamVector& th,
                             int t, Vector& lg) {
    const Vector yt = y.observations.row(t).transpose();
    for (int p = 0; p < x_new.rows(); ++p)
      lg[p] = model.log_obs_density(yt, x_new.row(p).transpose(), th, t);
  };
  return smc_detail::run_filter(model, theta, y, p_count, rng, n_paths, propagate, weight);
}

// Conditionally optimal proposal for X_t | X_{t-1}, y_t in the additive
// Gaussian state-space family: with prior N(mu, sx^2 I) and likelihood
// N(y; B x, sy^2 I), the proposal is N(Sigma (mu/sx^2 + B^T y/sy^2), Sigma),
// Sigma^-1 = I/sx^2 + B^T B/sy^2, and the incremental weight is the
// predictive density N(y; B mu, sx^2 B B^T + sy^2 I), independent of the
// proposed particle.
struct GuidedProposal {
  Matrix sigma;        // proposal covariance
  Matrix sigma_chol;   // lower Cholesky factor of sigma
  Matrix bt_over_sy2;  // B^T / sy^2
  double inv_sx2 = 0.0;
  Matrix pred_chol;    // lower Cholesky of the predictive covariance
  double pred_logdet = 0.0;

  explicit GuidedProposal(const SsmConfig& cfg) {
    cfg.validate();
    const double sx2 = cfg.sigma_x * cfg.sigma_x;
    const double sy2 = cfg.sigma_y * cfg.sigma_y;
    inv_sx2 = 1.0 / sx2;
    Matrix prec = Matrix::Identity(cfg.state_dim, cfg.state_dim) / sx2 +
                  cfg.b.transpose() * cfg.b / sy2;
    Eigen::LLT<Matrix> llt(prec);
    require(llt.info() == Eigen::Success, "GuidedProposal: precision not PD");
    sigma = llt.solve(Matrix::Identity(cfg.state_dim, cfg.state_dim));
    sigma_chol = Eigen::LLT<Matrix>(sigma).matrixL();
    bt_over_sy2 = cfg.b.transpose() / sy2;

    Matrix pred = sx2 * cfg.b * cfg.b.transpose() +
                  sy2 * Matrix::Identity(cfg.obs_dim, cfg.obs_dim);
    Eigen::LLT<Matrix> pllt(pred);
    require(pllt.info() == Eigen::Success, "GuidedProposal: predictive covariance not PD");
    pred_chol = pllt.matrixL();
    pred_logdet = 2.0 * pred_chol.diagonal().array().log().sum();
  }

  Vector mean(const Vector& transition_mean, const Vector& y_t) const {
    return sigma * (inv_sx2 * transition_mean + bt_over_sy2 * y_t);
  }

  // log N(y; B mu, pred) via the cached Cholesky factor.
  double predictive_logpdf(const Vector& y_t, const Vector& b_mu) const {
    Vector r = pred_chol.triangularView<Eigen::Lower>().solve(y_t - b_mu);
    return -0.5 * r.squaredNorm() - 0.5 * pred_logdet -
           0.5 * y_t.size() * 1.8378770664093454836;
  }
};

inline FilterResult guided_filter(const SsmConfig& cfg, bool linear, const ObsSeries& y,
                                  int p_count, RngStream& rng, int n_paths = 0) {
  auto model = linear ? linear_gaussian_model(cfg) : nonlinear_ssm(cfg);
  ParamVector theta = model->make_params(Vector(0));
  GuidedProposal prop(cfg);
  const int k = cfg.state_dim;

  auto transition_mean = [&cfg, linear](const Vector& x_prev) {
    return linear ? Vector(cfg.a * x_prev) : Vector(cfg.a * sin_exp(x_prev));
  };

  auto propagate = [&](const Matrix& x, Matrix& x_new, const ParamVector&, int t,
                       RngStream& step_rng) {
    const Vector yt = y.observations.row(t).transpose();
    for (int p = 0; p < x.rows(); ++p) {
      RngStream prng = step_rng.derive(static_cast<std::uint64_t>(p));
      Vector z(k);
      for (int i = 0; i < k; ++i) z[i] = prng.normal();
      Vector m = prop.mean(transition_mean(x.row(p).transpose()), yt);
      x_new.row(p) = (m + prop.sigma_chol * z).transpose();
    }
  };
  auto weight = [&](const Matrix& x, const Matrix&, const ParamVector&, int t, Vector& lg) {
    const Vector yt = y.observations.row(t).transpose();
    for (int p = 0; p < x.rows(); ++p)
      lg[p] = prop.predictive_logpdf(yt, cfg.b * transition_mean(x.row(p).transpose()));
  };
  return smc_detail::run_filter(*model, theta, y, p_count, rng, n_paths, propagate, weight);
}

// Ancestral draw from the prior dynamics (no conditioning on data).
inline StatePath prdyn_sample(const ImplicitHmm& model, const ParamVector& theta,
                              RngStream& rng) {
  const int m = model.length();
  Matrix states(m, model.state_dim());
  states.row(0) = model.initial_state(theta).transpose();
  for (int t = 1; t < m; ++t)
    states.row(t) = model.transition(states.row(t - 1).transpose(), theta, t, rng).transpose();
  return StatePath(std::move(states), model.times());
}

// Replicated observation series for a set of posterior parameter draws: run a
// bootstrap filter per theta, take one smoothed path, and push it through the
// observation model.
inline std::vector<ObsSeries> smc_posterior_predictive(const ImplicitHmm& model,
                                                       const std::vector<ParamVector>& thetas,
                                                       const ObsSeries& y, int p_count,
                                                       RngStream& rng) {
  std::vector<ObsSeries> out;
  out.reserve(thetas.size());
  for (std::size_t l = 0; l < thetas.size(); ++l) {
    RngStream lrng = rng.derive(static_cast<std::uint64_t>(l));
    FilterResult fr = bootstrap_filter(model, thetas[l], y, p_count, lrng, 1);
    const StatePath& path = fr.paths[0];
    Matrix obs(model.length(), model.obs_dim());
    RngStream org = lrng.derive("obs");
    for (int t = 0; t < model.length(); ++t)
      obs.row(t) =
          model.observe(path.states.row(t).transpose(), thetas[l], t, org).transpose();
    out.emplace_back(std::move(obs), model.times());
  }
  return out;
}

}  // namespace lfhmm
