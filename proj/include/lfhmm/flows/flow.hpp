#pragma once

// Conditional masked autoregressive flow: a stack of MadeBlock affine
// transforms with coordinate-reversal permutations in between and a standard
// normal base. The density direction (data -> noise) is a single network
// pass per block; sampling inverts the stack coordinate-by-coordinate.
//
// Targets and contexts are standardised internally (statistics fixed at
// training time); log_density and sample speak raw units, with the Jacobian
// of the standardisation included in reported densities.

#include "lfhmm/flows/made.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace lfhmm {

struct FlowConfig {
  int target_dim = 1;
  int context_dim = 0;
  int num_blocks = 5;
  int hidden = 50;

  void validate() const {
    require(target_dim >= 1, "FlowConfig: target_dim must be >= 1");
    require(context_dim >= 0, "FlowConfig: context_dim must be >= 0");
    require(num_blocks >= 1, "FlowConfig: num_blocks must be >= 1");
    require(hidden >= 1, "FlowConfig: hidden must be >= 1");
  }
};

class ConditionalFlow {
 public:
  ConditionalFlow() = default;

  ConditionalFlow(FlowConfig cfg, RngStream init_rng) : cfg_(cfg) {
    cfg_.validate();
    for (int j = 0; j < cfg_.num_blocks; ++j) {
      RngStream block_rng = init_rng.derive(j);
      blocks_.emplace_back(cfg_.target_dim, cfg_.context_dim, cfg_.hidden, block_rng);
    }
    t_mean_ = Vector::Zero(cfg_.target_dim);
    t_std_ = Vector::Ones(cfg_.target_dim);
    c_mean_ = Vector::Zero(cfg_.context_dim);
    c_std_ = Vector::Ones(cfg_.context_dim);
  }

  const FlowConfig& config() const { return cfg_; }
  const std::vector<MadeBlock>& blocks() const { return blocks_; }
  std::vector<MadeBlock>& blocks() { return blocks_; }

  // Standardisation statistics; stds below 1e-12 (constant columns) are
  // replaced by 1 so those coordinates pass through unscaled.
  void set_standardization(Vector t_mean, Vector t_std, Vector c_mean, Vector c_std) {
    require(t_mean.size() == cfg_.target_dim && t_std.size() == cfg_.target_dim,
            "set_standardization: target stats shape mismatch");
    require(c_mean.size() == cfg_.context_dim && c_std.size() == cfg_.context_dim,
            "set_standardization: context stats shape mismatch");
    auto guard = [](Vector& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!(v[i] > 1e-12)) v[i] = 1.0;
    };
    guard(t_std);
    guard(c_std);
    t_mean_ = std::move(t_mean);
    t_std_ = std::move(t_std);
    c_mean_ = std::move(c_mean);
    c_std_ = std::move(c_std);
  }

  const Vector& target_mean() const { return t_mean_; }
  const Vector& target_std() const { return t_std_; }
  const Vector& context_mean() const { return c_mean_; }
  const Vector& context_std() const { return c_std_; }

  Vector log_density_batch(const Matrix& x, const Matrix& ctx) const {
    const int n = static_cast<int>(x.rows());
    const int d = cfg_.target_dim;
    Matrix u = standardize_targets(x);
    Matrix cs = standardize_contexts(ctx, n);
    Vector acc = Vector::Constant(n, -log_t_std_sum());
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      if (j > 0) u = u.rowwise().reverse().eval();
      MadeBlock::Eval e = blocks_[j].forward(u, cs);
      u = (u - e.mu).cwiseProduct((-e.alpha).array().exp().matrix());
      acc -= e.alpha.rowwise().sum();
    }
    return acc - 0.5 * u.rowwise().squaredNorm() -
           Vector::Constant(n, 0.5 * d * 1.8378770664093454836);
  }

  double log_density(const Vector& x, const Vector& ctx) const {
    Matrix xm = x.transpose();
    Matrix cm = cfg_.context_dim > 0 ? Matrix(ctx.transpose()) : Matrix(1, 0);
    return log_density_batch(xm, cm)[0];
  }

  // Draws one sample per context row, consuming n*d normal variates from rng
  // in row-major order. If log_q is given it receives the exact log-density
  // of each returned sample (free by-product of the inversion).
  Matrix sample_batch(const Matrix& ctx, RngStream& rng, Vector* log_q = nullptr) const {
    const int n = static_cast<int>(ctx.rows());
    require(cfg_.context_dim == 0 || ctx.cols() == cfg_.context_dim,
            "sample_batch: context shape mismatch");
    const int d = cfg_.target_dim;
    Matrix u(n, d);
    for (int r = 0; r < n; ++r)
      for (int i = 0; i < d; ++i) u(r, i) = rng.normal();
    Vector acc = -0.5 * u.rowwise().squaredNorm() -
                 Vector::Constant(n, 0.5 * d * 1.8378770664093454836 + log_t_std_sum());
    Matrix cs = standardize_contexts(ctx, n);

    for (int j = static_cast<int>(blocks_.size()) - 1; j >= 0; --j) {
      Matrix target = u;
      Matrix filled = target;  // coordinates < pass index hold inverted values
      for (int i = 0; i < d; ++i) {
        MadeBlock::Eval e = blocks_[j].forward(filled, cs);
        filled.col(i) =
            target.col(i).cwiseProduct(e.alpha.col(i).array().exp().matrix()) + e.mu.col(i);
        acc -= e.alpha.col(i);
      }
      u = (j > 0) ? Matrix(filled.rowwise().reverse()) : filled;
    }
    if (log_q) *log_q = acc;
    return (u.array().rowwise() * t_std_.transpose().array()).matrix().rowwise() +
           t_mean_.transpose();
  }

  Vector sample(const Vector& ctx, RngStream& rng, double* log_q = nullptr) const {
    Matrix cm = cfg_.context_dim > 0 ? Matrix(ctx.transpose()) : Matrix(1, 0);
    Vector lq;
    Matrix s = sample_batch(cm, rng, log_q ? &lq : nullptr);
    if (log_q) *log_q = lq[0];
    return s.row(0).transpose();
  }

  // Gradient of the mean negative log-likelihood over the batch with respect
  // to the flattened parameters. Returns the mean log-likelihood.
  double neg_loglik_grad(const Matrix& x, const Matrix& ctx, Vector& grad_out) const {
    const int n = static_cast<int>(x.rows());
    const double inv_n = 1.0 / static_cast<double>(n);
    Matrix cs = standardize_contexts(ctx, n);

    std::vector<Matrix> inputs(blocks_.size());
    std::vector<Matrix> outputs(blocks_.size());
    std::vector<MadeBlock::Eval> evals(blocks_.size());
    Matrix u = standardize_targets(x);
    Vector acc = Vector::Constant(n, -log_t_std_sum());
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
      if (j > 0) u = u.rowwise().reverse().eval();
      inputs[j] = u;
      evals[j] = blocks_[j].forward(u, cs);
      u = (u - evals[j].mu).cwiseProduct((-evals[j].alpha).array().exp().matrix());
      outputs[j] = u;
      acc -= evals[j].alpha.rowwise().sum();
    }
    const double mean_ll =
        (acc - 0.5 * u.rowwise().squaredNorm() -
         Vector::Constant(n, 0.5 * cfg_.target_dim * 1.8378770664093454836))
            .mean();

    std::vector<MadeParams> grads;
    grads.reserve(blocks_.size());
    for (const MadeBlock& b : blocks_) grads.push_back(b.zero_grad());

    Matrix g = inv_n * u;  // dL/du_final, L = -(1/N) sum log q
    for (int j = static_cast<int>(blocks_.size()) - 1; j >= 0; --j) {
      const Matrix exp_neg_al = (-evals[j].alpha).array().exp().matrix();
      Matrix g_direct = g.cwiseProduct(exp_neg_al);
      Matrix g_mu = -g_direct;
      Matrix g_al = -g.cwiseProduct(outputs[j]) + Matrix::Constant(g.rows(), g.cols(), inv_n);
      Matrix g_net = blocks_[j].backward(inputs[j], cs, evals[j], g_mu, g_al, grads[j]);
      g = g_direct + g_net;
      if (j > 0) g = g.rowwise().reverse().eval();
    }

    grad_out.resize(param_count());
    Eigen::Index off = 0;
    for (const MadeParams& gp : grads) {
      gp.for_each([&](const auto& m) {
        grad_out.segment(off, m.size()) =
            Eigen::Map<const Vector>(m.data(), m.size());
        off += m.size();
      });
    }
    return mean_ll;
  }

  Eigen::Index param_count() const {
    Eigen::Index total = 0;
    for (const MadeBlock& b : blocks_)
      b.params().for_each([&](const auto& m) { total += m.size(); });
    return total;
  }

  Vector flatten_params() const {
    Vector flat(param_count());
    Eigen::Index off = 0;
    for (const MadeBlock& b : blocks_)
      b.params().for_each([&](const auto& m) {
        flat.segment(off, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
        off += m.size();
      });
    return flat;
  }

  // 1.0 for free parameters, 0.0 for entries pinned to zero by the
  // autoregressive masks (in flatten_params() order).
  Vector param_mask() const {
    Vector mask(param_count());
    Eigen::Index off = 0;
    for (const MadeBlock& b : blocks_) {
      auto put = [&](const Matrix& m) {
        mask.segment(off, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
        off += m.size();
      };
      auto put_free = [&](Eigen::Index n) {
        mask.segment(off, n).setOnes();
        off += n;
      };
      const MadeParams& p = b.params();
      put(b.input_mask());
      put_free(p.v1.size());
      put_free(p.b1.size());
      put(b.hidden_mask());
      put_free(p.b2.size());
      put(b.output_mask());
      put_free(p.v_mu.size());
      put_free(p.b_mu.size());
      put(b.output_mask());
      put_free(p.v_al.size());
      put_free(p.b_al.size());
    }
    return mask;
  }

  void set_params(const Vector& flat) {
    require(flat.size() == param_count(), "set_params: wrong parameter count");
    Eigen::Index off = 0;
    for (MadeBlock& b : blocks_)
      b.params().for_each([&](auto& m) {
        m = Eigen::Map<const Matrix>(flat.data() + off, m.rows(), m.cols());
        off += m.size();
      });
  }

 private:
  Matrix standardize_targets(const Matrix& x) const {
    require(x.cols() == cfg_.target_dim, "flow: target shape mismatch");
    return ((x.rowwise() - t_mean_.transpose()).array().rowwise() /
            t_std_.transpose().array())
        .matrix();
  }

  Matrix standardize_contexts(const Matrix& ctx, int n) const {
    if (cfg_.context_dim == 0) return Matrix(n, 0);
    require(ctx.cols() == cfg_.context_dim && ctx.rows() == n,
            "flow: context shape mismatch");
    return ((ctx.rowwise() - c_mean_.transpose()).array().rowwise() /
            c_std_.transpose().array())
        .matrix();
  }

  double log_t_std_sum() const { return t_std_.array().log().sum(); }

  FlowConfig cfg_;
  std::vector<MadeBlock> blocks_;
  Vector t_mean_, t_std_, c_mean_, c_std_;
};

// ---------------------------------------------------------------------------
// Checkpointing: a little-endian binary container with magic, shape header,
// standardisation statistics, flattened parameters, and an FNV-1a checksum.
// Round-trips are bit-exact.

namespace flows_detail {

inline constexpr char checkpoint_magic[8] = {'L', 'F', 'H', 'M', 'M', 'F', 'L', '1'};

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ull;
  void feed(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ull;
    }
  }
};

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

inline void write_u64(std::ostream& os, Fnv& fnv, std::uint64_t v) {
  std::uint64_t le = to_le(v);
  os.write(reinterpret_cast<const char*>(&le), 8);
  fnv.feed(&le, 8);
}

inline void write_f64(std::ostream& os, Fnv& fnv, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, fnv, bits);
}

inline std::uint64_t read_u64(std::istream& is, Fnv& fnv) {
  std::uint64_t le = 0;
  is.read(reinterpret_cast<char*>(&le), 8);
  if (!is) throw Error("checkpoint: truncated file");
  fnv.feed(&le, 8);
  return to_le(le);
}

inline double read_f64(std::istream& is, Fnv& fnv) {
  std::uint64_t bits = read_u64(is, fnv);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace flows_detail

inline void save_checkpoint(const ConditionalFlow& flow, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("save_checkpoint: cannot open " + path);
  using namespace flows_detail;
  os.write(checkpoint_magic, 8);
  Fnv fnv;
  const FlowConfig& cfg = flow.config();
  write_u64(os, fnv, static_cast<std::uint64_t>(cfg.num_blocks));
  write_u64(os, fnv, static_cast<std::uint64_t>(cfg.target_dim));
  write_u64(os, fnv, static_cast<std::uint64_t>(cfg.context_dim));
  write_u64(os, fnv, static_cast<std::uint64_t>(cfg.hidden));
  auto write_vec = [&](const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(os, fnv, v[i]);
  };
  write_vec(flow.target_mean());
  write_vec(flow.target_std());
  write_vec(flow.context_mean());
  write_vec(flow.context_std());
  write_vec(flow.flatten_params());
  std::uint64_t le = to_le(fnv.h);
  os.write(reinterpret_cast<const char*>(&le), 8);
  if (!os) throw Error("save_checkpoint: write failed for " + path);
}

inline ConditionalFlow load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_checkpoint: cannot open " + path);
  using namespace flows_detail;
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, checkpoint_magic, 8) != 0)
    throw Error("load_checkpoint: bad magic in " + path);
  Fnv fnv;
  FlowConfig cfg;
  cfg.num_blocks = static_cast<int>(read_u64(is, fnv));
  cfg.target_dim = static_cast<int>(read_u64(is, fnv));
  cfg.context_dim = static_cast<int>(read_u64(is, fnv));
  cfg.hidden = static_cast<int>(read_u64(is, fnv));
  require(cfg.num_blocks >= 1 && cfg.num_blocks <= 1000 && cfg.target_dim >= 1 &&
              cfg.target_dim <= 100000 && cfg.context_dim >= 0 && cfg.hidden >= 1,
          "load_checkpoint: implausible header");
  ConditionalFlow flow(cfg, RngStream(0, 0));
  auto read_vec = [&](Eigen::Index n) {
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = read_f64(is, fnv);
    return v;
  };
  Vector tm = read_vec(cfg.target_dim);
  Vector ts = read_vec(cfg.target_dim);
  Vector cm = read_vec(cfg.context_dim);
  Vector cs = read_vec(cfg.context_dim);
  Vector params = read_vec(flow.param_count());
  std::uint64_t stored = 0;
  is.read(reinterpret_cast<char*>(&stored), 8);
  if (!is) throw Error("load_checkpoint: truncated checksum in " + path);
  if (to_le(stored) != fnv.h) throw Error("load_checkpoint: checksum mismatch in " + path);
  flow.set_params(params);
  // Bypass the std floor guard: stats were already guarded when first set.
  flow.set_standardization(std::move(tm), std::move(ts), std::move(cm), std::move(cs));
  return flow;
}

}  // namespace lfhmm
