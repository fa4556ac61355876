#pragma once

// One masked autoregressive block: a two-hidden-layer ReLU MADE network that
// maps a target vector x and a context vector to per-coordinate shift mu and
// log-scale alpha, with masks enforcing that (mu_i, alpha_i) depend only on
// x_1..x_{i-1}. Context enters the first hidden layer and, through a separate
// unmasked skip connection, the outputs directly, so every coordinate
// (including the first) is context-conditioned.
//
// Weights are kept masked as an invariant: masked entries are initialised to
// zero and their gradients are zeroed in backward(), so optimiser updates
// never touch them and forward() can use plain dense products.

#include "lfhmm/core/rng.hpp"
#include "lfhmm/core/types.hpp"

#include <cmath>
#include <vector>

namespace lfhmm {

inline constexpr double log_scale_clamp = 7.0;

namespace flows_detail {

// Batch lives in rows: Y = X * W^T + b^T per row.
inline Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
  return (x * w.transpose()).rowwise() + b.transpose();
}

}  // namespace flows_detail

struct MadeParams {
  Matrix w1, v1;  // hidden1 x d, hidden1 x c
  Vector b1;
  Matrix w2;      // hidden2 x hidden1
  Vector b2;
  Matrix w_mu, v_mu;  // d x hidden2, d x c
  Vector b_mu;
  Matrix w_al, v_al;
  Vector b_al;

  template <typename F>
  void for_each(F&& f) {
    f(w1); f(v1); f(b1); f(w2); f(b2);
    f(w_mu); f(v_mu); f(b_mu); f(w_al); f(v_al); f(b_al);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(w1); f(v1); f(b1); f(w2); f(b2);
    f(w_mu); f(v_mu); f(b_mu); f(w_al); f(v_al); f(b_al);
  }
};

class MadeBlock {
 public:
  MadeBlock(int target_dim, int context_dim, int hidden, RngStream& init_rng)
      : d_(target_dim), c_(context_dim), h_(hidden) {
    require(d_ >= 1 && c_ >= 0 && h_ >= 1, "MadeBlock: bad dimensions");
    build_masks();
    init_params(init_rng);
  }

  int target_dim() const { return d_; }
  int context_dim() const { return c_; }
  int hidden_dim() const { return h_; }

  const MadeParams& params() const { return p_; }
  MadeParams& params() { return p_; }
  const Matrix& input_mask() const { return m1_; }
  const Matrix& hidden_mask() const { return m2_; }
  const Matrix& output_mask() const { return m_out_; }

  struct Eval {
    Matrix h1, h2;        // post-ReLU activations
    Matrix mu, alpha;     // clamped alpha
    Matrix alpha_raw;     // pre-clamp, needed to gate the clamp gradient
  };

  Eval forward(const Matrix& x, const Matrix& ctx) const {
    check_shapes(x, ctx);
    Eval e;
    Matrix pre1 = flows_detail::affine(x, p_.w1, p_.b1);
    if (c_ > 0) pre1 += ctx * p_.v1.transpose();
    e.h1 = pre1.cwiseMax(0.0);
    e.h2 = flows_detail::affine(e.h1, p_.w2, p_.b2).cwiseMax(0.0);
    e.mu = flows_detail::affine(e.h2, p_.w_mu, p_.b_mu);
    e.alpha_raw = flows_detail::affine(e.h2, p_.w_al, p_.b_al);
    if (c_ > 0) {
      e.mu += ctx * p_.v_mu.transpose();
      e.alpha_raw += ctx * p_.v_al.transpose();
    }
    e.alpha = e.alpha_raw.cwiseMax(-log_scale_clamp).cwiseMin(log_scale_clamp);
    return e;
  }

  // Accumulates parameter gradients into grad (same shapes as params, masked)
  // and returns dL/dx. g_mu and g_alpha are dL/dmu and dL/dalpha. ReLU and
  // clamp gates use the cached Eval.
  Matrix backward(const Matrix& x, const Matrix& ctx, const Eval& e, const Matrix& g_mu,
                  Matrix g_alpha, MadeParams& grad) const {
    // Clamp gate: zero gradient where alpha saturated.
    g_alpha = (e.alpha_raw.array().abs() < log_scale_clamp)
                  .select(g_alpha, Matrix::Zero(g_alpha.rows(), g_alpha.cols()));

    grad.w_mu += (g_mu.transpose() * e.h2).cwiseProduct(m_out_);
    grad.b_mu += g_mu.colwise().sum().transpose();
    grad.w_al += (g_alpha.transpose() * e.h2).cwiseProduct(m_out_);
    grad.b_al += g_alpha.colwise().sum().transpose();
    if (c_ > 0) {
      grad.v_mu += g_mu.transpose() * ctx;
      grad.v_al += g_alpha.transpose() * ctx;
    }

    Matrix g_h2 = g_mu * p_.w_mu + g_alpha * p_.w_al;
    g_h2 = (e.h2.array() > 0.0).select(g_h2, Matrix::Zero(g_h2.rows(), g_h2.cols()));
    grad.w2 += (g_h2.transpose() * e.h1).cwiseProduct(m2_);
    grad.b2 += g_h2.colwise().sum().transpose();

    Matrix g_h1 = g_h2 * p_.w2;
    g_h1 = (e.h1.array() > 0.0).select(g_h1, Matrix::Zero(g_h1.rows(), g_h1.cols()));
    grad.w1 += (g_h1.transpose() * x).cwiseProduct(m1_);
    grad.b1 += g_h1.colwise().sum().transpose();
    if (c_ > 0) grad.v1 += g_h1.transpose() * ctx;

    return g_h1 * p_.w1;
  }

  MadeParams zero_grad() const {
    MadeParams g;
    g.w1 = Matrix::Zero(h_, d_);
    g.v1 = Matrix::Zero(h_, c_);
    g.b1 = Vector::Zero(h_);
    g.w2 = Matrix::Zero(h_, h_);
    g.b2 = Vector::Zero(h_);
    g.w_mu = Matrix::Zero(d_, h_);
    g.v_mu = Matrix::Zero(d_, c_);
    g.b_mu = Vector::Zero(d_);
    g.w_al = Matrix::Zero(d_, h_);
    g.v_al = Matrix::Zero(d_, c_);
    g.b_al = Vector::Zero(d_);
    return g;
  }

 private:
  void check_shapes(const Matrix& x, const Matrix& ctx) const {
    require(x.cols() == d_, "MadeBlock: target dimension mismatch");
    require(c_ == 0 || (ctx.cols() == c_ && ctx.rows() == x.rows()),
            "MadeBlock: context shape mismatch");
  }

  void build_masks() {
    // Input coordinate i has degree i+1. Hidden degrees cycle 1..d-1 (degree-d
    // hidden units could never feed any output, so they are skipped); for
    // d = 1 all hidden units take degree 0 and act as a pure context network.
    std::vector<int> deg_h(h_);
    for (int k = 0; k < h_; ++k) deg_h[k] = (d_ > 1) ? 1 + (k % (d_ - 1)) : 0;

    m1_ = Matrix::Zero(h_, d_);
    for (int k = 0; k < h_; ++k)
      for (int i = 0; i < d_; ++i)
        if (deg_h[k] >= i + 1) m1_(k, i) = 1.0;

    m2_ = Matrix::Zero(h_, h_);
    for (int k = 0; k < h_; ++k)
      for (int j = 0; j < h_; ++j)
        if (deg_h[k] >= deg_h[j]) m2_(k, j) = 1.0;

    m_out_ = Matrix::Zero(d_, h_);
    for (int o = 0; o < d_; ++o)
      for (int k = 0; k < h_; ++k)
        if (o + 1 > deg_h[k]) m_out_(o, k) = 1.0;
  }

  void init_params(RngStream& rng) {
    auto uniform_mat = [&rng](int rows, int cols, double scale) {
      Matrix m(rows, cols);
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-scale, scale);
      return m;
    };
    // Hidden layers: scaled uniform, masked. Output layers: zero, so a fresh
    // block is exactly the identity map (mu = alpha = 0).
    p_.w1 = uniform_mat(h_, d_, 1.0 / std::sqrt(static_cast<double>(d_))).cwiseProduct(m1_);
    p_.v1 = c_ > 0 ? uniform_mat(h_, c_, 1.0 / std::sqrt(static_cast<double>(c_)))
                   : Matrix::Zero(h_, 0);
    p_.b1 = Vector::Zero(h_);
    p_.w2 = uniform_mat(h_, h_, 1.0 / std::sqrt(static_cast<double>(h_))).cwiseProduct(m2_);
    p_.b2 = Vector::Zero(h_);
    p_.w_mu = Matrix::Zero(d_, h_);
    p_.v_mu = Matrix::Zero(d_, c_);
    p_.b_mu = Vector::Zero(d_);
    p_.w_al = Matrix::Zero(d_, h_);
    p_.v_al = Matrix::Zero(d_, c_);
    p_.b_al = Vector::Zero(d_);
  }

  int d_, c_, h_;
  Matrix m1_, m2_, m_out_;
  MadeParams p_;
};

}  // namespace lfhmm
