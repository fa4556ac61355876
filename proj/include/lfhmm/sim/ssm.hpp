#pragma once

// Gaussian state-space models on a unit time grid:
//
//   X_t | X_{t-1} ~ N(A * g(X_{t-1}), sigma_x^2 I)
//   y_t | X_t     ~ N(B * X_t,        sigma_y^2 I)
//
// with g(x) = sin(exp(x)) elementwise for the nonlinear benchmark and
// g(x) = x for the linear-Gaussian model, whose posterior is exactly
// computable and serves as the ground-truth oracle.

#include "lfhmm/core/model.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>

namespace lfhmm {

struct SsmConfig {
  int state_dim = 1;
  int obs_dim = 1;
  int length = 50;  // M, including t = 0
  double sigma_x = 0.5;
  double sigma_y = 0.5;
  Matrix a;   // K x K
  Matrix b;   // L x K
  Vector x0;  // K

  // Benchmark default: A = 0.9 I, B = 2 I-ish rectangular, X0 = 0.
  static SsmConfig standard(int k, int l, int m, double sx, double sy,
                            double a_scale = 0.9, double b_scale = 2.0) {
    SsmConfig c;
    c.state_dim = k;
    c.obs_dim = l;
    c.length = m;
    c.sigma_x = sx;
    c.sigma_y = sy;
    c.a = a_scale * Matrix::Identity(k, k);
    c.b = b_scale * Matrix::Identity(l, k);
    c.x0 = Vector::Zero(k);
    return c;
  }

  void validate() const {
    require(state_dim > 0 && obs_dim > 0 && length >= 2, "SsmConfig: bad dimensions");
    require(sigma_x > 0 && sigma_y > 0, "SsmConfig: noise scales must be > 0");
    require(a.rows() == state_dim && a.cols() == state_dim, "SsmConfig: A must be K x K");
    require(b.rows() == obs_dim && b.cols() == state_dim, "SsmConfig: B must be L x K");
    require(x0.size() == state_dim, "SsmConfig: X0 must have length K");
  }
};

inline Vector sin_exp(const Vector& x) {
  return x.unaryExpr([](double v) { return std::sin(std::exp(v)); });
}

namespace detail {

inline double gaussian_iso_logpdf(const Vector& x, const Vector& mean, double sd) {
  const double n = static_cast<double>(x.size());
  return -0.5 * (x - mean).squaredNorm() / (sd * sd) -
         n * (std::log(sd) + 0.91893853320467274178);  // log sqrt(2 pi)
}

class GaussianSsm final : public ImplicitHmm {
 public:
  GaussianSsm(SsmConfig cfg, bool linear, std::string name)
      : cfg_(std::move(cfg)), linear_(linear), name_(std::move(name)) {
    cfg_.validate();
    times_ = Vector::LinSpaced(cfg_.length, 0.0, static_cast<double>(cfg_.length - 1));
  }

  std::string name() const override { return name_; }
  int state_dim() const override { return cfg_.state_dim; }
  int obs_dim() const override { return cfg_.obs_dim; }
  const Vector& times() const override { return times_; }
  const Prior& prior() const override { return prior_; }  // no free parameters
  Vector initial_state(const ParamVector&) const override { return cfg_.x0; }
  bool has_obs_density() const override { return true; }

  const SsmConfig& config() const { return cfg_; }
  bool is_linear() const { return linear_; }

  Vector transition_mean(const Vector& x_prev) const {
    return linear_ ? Vector(cfg_.a * x_prev) : Vector(cfg_.a * sin_exp(x_prev));
  }

 protected:
  Vector sample_transition(const Vector& x_prev, const ParamVector&, int,
                           RngStream& rng) const override {
    Vector x = transition_mean(x_prev);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += cfg_.sigma_x * rng.normal();
    return x;
  }

  Vector sample_observation(const Vector& x, const ParamVector&, int,
                            RngStream& rng) const override {
    Vector y = cfg_.b * x;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += cfg_.sigma_y * rng.normal();
    return y;
  }

  double obs_log_density(const Vector& y, const Vector& x, const ParamVector&,
                         int) const override {
    return gaussian_iso_logpdf(y, cfg_.b * x, cfg_.sigma_y);
  }

 private:
  SsmConfig cfg_;
  bool linear_;
  std::string name_;
  Vector times_;
  Prior prior_;
};

}  // namespace detail

inline std::unique_ptr<ImplicitHmm> nonlinear_ssm(SsmConfig cfg) {
  return std::make_unique<detail::GaussianSsm>(std::move(cfg), false, "nonlinear_ssm");
}

inline std::unique_ptr<ImplicitHmm> linear_gaussian_model(SsmConfig cfg) {
  return std::make_unique<detail::GaussianSsm>(std::move(cfg), true, "linear_gaussian");
}

}  // namespace lfhmm
