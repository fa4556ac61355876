#pragma once

// Maximum-likelihood training for ConditionalFlow: Adam on minibatches with a
// held-out validation split, early stopping on validation log-likelihood, and
// best-weights restore. Standardisation statistics come from the training
// split only.

#include "lfhmm/flows/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace lfhmm {

struct TrainConfig {
  int batch_size = 256;
  double learning_rate = 5e-4;
  double val_fraction = 0.10;
  int patience = 20;       // epochs without validation improvement tolerated
  int max_epochs = 200;
  std::uint64_t seed = 0;

  void validate() const {
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(val_fraction >= 0.0 && val_fraction < 1.0,
            "TrainConfig: val_fraction must be in [0,1)");
    require(patience >= 0, "TrainConfig: patience must be >= 0");
    require(max_epochs >= 1, "TrainConfig: max_epochs must be >= 1");
  }
};

struct TrainReport {
  std::vector<double> train_ll;  // per epoch, mean over minibatches
  std::vector<double> val_ll;
  int best_epoch = -1;
  int epochs_run = 0;
};

namespace flows_detail {

struct Adam {
  Vector m, v;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long t = 0;

  explicit Adam(Eigen::Index n) : m(Vector::Zero(n)), v(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad, double lr) {
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double corr1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double corr2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params -= (lr / corr1) * m.cwiseQuotient(
                  ((v / corr2).cwiseSqrt().array() + eps).matrix());
  }
};

inline void fisher_yates(std::vector<int>& idx, RngStream& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(i));
    std::swap(idx[i - 1], idx[std::min(j, i - 1)]);
  }
}

inline Matrix gather_rows(const Matrix& m, const std::vector<int>& idx, int begin, int end) {
  Matrix out(end - begin, m.cols());
  for (int r = begin; r < end; ++r) out.row(r - begin) = m.row(idx[r]);
  return out;
}

}  // namespace flows_detail

inline std::pair<ConditionalFlow, TrainReport> train_flow(const Matrix& targets,
                                                          const Matrix& contexts,
                                                          FlowConfig flow_cfg,
                                                          const TrainConfig& cfg) {
  cfg.validate();
  flow_cfg.validate();
  const int n = static_cast<int>(targets.rows());
  require(n >= 2, "train_flow: need at least 2 examples");
  require(targets.cols() == flow_cfg.target_dim, "train_flow: target dim mismatch");
  require(flow_cfg.context_dim == 0 ||
              (contexts.rows() == n && contexts.cols() == flow_cfg.context_dim),
          "train_flow: context shape mismatch");
  require(targets.allFinite() && contexts.allFinite(),
          "train_flow: non-finite training data");

  RngStream rng = RngStream(cfg.seed, 0).derive("flow-train");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  flows_detail::fisher_yates(idx, rng);

  const int n_val = cfg.val_fraction > 0.0
                        ? std::max(1, static_cast<int>(std::lround(cfg.val_fraction * n)))
                        : 0;
  require(n - n_val >= 1, "train_flow: validation split leaves no training data");
  std::vector<int> val_idx(idx.begin(), idx.begin() + n_val);
  std::vector<int> train_idx(idx.begin() + n_val, idx.end());
  const int n_train = static_cast<int>(train_idx.size());

  Matrix val_x = flows_detail::gather_rows(targets, idx, 0, n_val);
  Matrix val_c = flow_cfg.context_dim > 0 ? flows_detail::gather_rows(contexts, idx, 0, n_val)
                                          : Matrix(n_val, 0);

  // Standardisation from the training split.
  Matrix train_x = flows_detail::gather_rows(targets, train_idx, 0, n_train);
  Matrix train_c = flow_cfg.context_dim > 0
                       ? flows_detail::gather_rows(contexts, train_idx, 0, n_train)
                       : Matrix(n_train, 0);
  auto col_stats = [](const Matrix& m, Vector& mean, Vector& sd) {
    mean = m.colwise().mean();
    sd = ((m.rowwise() - mean.transpose()).array().square().colwise().sum() /
          std::max<double>(1.0, static_cast<double>(m.rows())))
             .sqrt()
             .matrix()
             .transpose();
  };
  Vector t_mean, t_std, c_mean, c_std;
  col_stats(train_x, t_mean, t_std);
  col_stats(train_c, c_mean, c_std);

  ConditionalFlow flow(flow_cfg, rng.derive("init"));
  flow.set_standardization(t_mean, t_std, c_mean, c_std);

  Vector params = flow.flatten_params();
  flows_detail::Adam adam(params.size());
  Vector grad(params.size());

  TrainReport report;
  Vector best_params = params;
  double best_val = -std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    flows_detail::fisher_yates(train_idx, rng);
    double epoch_ll = 0.0;
    for (int start = 0; start < n_train; start += cfg.batch_size) {
      const int stop = std::min(n_train, start + cfg.batch_size);
      Matrix bx = flows_detail::gather_rows(targets, train_idx, start, stop);
      Matrix bc = flow_cfg.context_dim > 0
                      ? flows_detail::gather_rows(contexts, train_idx, start, stop)
                      : Matrix(stop - start, 0);
      const double ll = flow.neg_loglik_grad(bx, bc, grad);
      epoch_ll += ll * (stop - start);
      adam.step(params, grad, cfg.learning_rate);
      flow.set_params(params);
    }
    report.train_ll.push_back(epoch_ll / n_train);
    report.epochs_run = epoch + 1;

    if (n_val > 0) {
      const double vll = flow.log_density_batch(val_x, val_c).mean();
      report.val_ll.push_back(vll);
      if (std::isfinite(vll) && vll > best_val) {
        best_val = vll;
        best_params = params;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best > cfg.patience) {
        break;
      }
    } else {
      best_params = params;
      report.best_epoch = epoch;
    }
  }

  if (report.best_epoch < 0)
    throw TrainingError("train_flow: validation log-likelihood never became finite");
  flow.set_params(best_params);
  return {std::move(flow), std::move(report)};
}

}  // namespace lfhmm
