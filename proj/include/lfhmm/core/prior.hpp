#pragma once

// Independent-component priors over model parameters. Only the three families
// the experiments use: Beta, Uniform(lo,hi), Gamma(shape,rate).

#include "lfhmm/core/rng.hpp"
#include "lfhmm/core/types.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace lfhmm {

struct PriorComponent {
  enum class Kind { beta, uniform, gamma };

  Kind kind = Kind::uniform;
  double a = 0.0;  // alpha | lower | shape
  double b = 1.0;  // beta  | upper | rate

  static PriorComponent make_beta(double alpha, double beta) {
    require(alpha > 0 && beta > 0, "beta prior: parameters must be > 0");
    return {Kind::beta, alpha, beta};
  }
  static PriorComponent make_uniform(double lo, double hi) {
    require(hi > lo, "uniform prior: upper must exceed lower");
    return {Kind::uniform, lo, hi};
  }
  static PriorComponent make_gamma(double shape, double rate) {
    require(shape > 0 && rate > 0, "gamma prior: shape and rate must be > 0");
    return {Kind::gamma, shape, rate};
  }

  double sample(RngStream& rng) const {
    switch (kind) {
      case Kind::beta: return rng.beta(a, b);
      case Kind::uniform: return rng.uniform(a, b);
      case Kind::gamma: return rng.gamma(a, b);
    }
    throw Error("unreachable prior kind");
  }

  double log_pdf(double x) const {
    constexpr double ninf = -std::numeric_limits<double>::infinity();
    switch (kind) {
      case Kind::beta:
        if (x <= 0.0 || x >= 1.0) return ninf;
        return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
               (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
      case Kind::uniform:
        if (x < a || x > b) return ninf;
        return -std::log(b - a);
      case Kind::gamma:
        if (x <= 0.0) return ninf;
        return a * std::log(b) + (a - 1.0) * std::log(x) - b * x - std::lgamma(a);
    }
    throw Error("unreachable prior kind");
  }

  double mean() const {
    switch (kind) {
      case Kind::beta: return a / (a + b);
      case Kind::uniform: return 0.5 * (a + b);
      case Kind::gamma: return a / b;
    }
    throw Error("unreachable prior kind");
  }

  double stddev() const {
    switch (kind) {
      case Kind::beta: {
        double s = a + b;
        return std::sqrt(a * b / (s * s * (s + 1.0)));
      }
      case Kind::uniform: return (b - a) / std::sqrt(12.0);
      case Kind::gamma: return std::sqrt(a) / b;
    }
    throw Error("unreachable prior kind");
  }

  double support_lo() const {
    switch (kind) {
      case Kind::beta: return 0.0;
      case Kind::uniform: return a;
      case Kind::gamma: return 0.0;
    }
    throw Error("unreachable prior kind");
  }

  double support_hi() const {
    switch (kind) {
      case Kind::beta: return 1.0;
      case Kind::uniform: return b;
      case Kind::gamma: return std::numeric_limits<double>::infinity();
    }
    throw Error("unreachable prior kind");
  }
};

class Prior {
 public:
  Prior() = default;
  Prior(std::vector<PriorComponent> comps, std::vector<std::string> names = {})
      : comps_(std::move(comps)), names_(std::move(names)) {
    if (names_.empty())
      for (std::size_t i = 0; i < comps_.size(); ++i)
        names_.push_back("p" + std::to_string(i));
    require(names_.size() == comps_.size(), "Prior: names/components size mismatch");
  }

  int dim() const { return static_cast<int>(comps_.size()); }
  const PriorComponent& component(int i) const { return comps_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

  Vector sample(RngStream& rng) const {
    Vector x(dim());
    for (int i = 0; i < dim(); ++i) x[i] = comps_[i].sample(rng);
    return x;
  }

  double log_pdf(const Vector& x) const {
    require(x.size() == dim(), "Prior::log_pdf: dimension mismatch");
    double lp = 0.0;
    for (int i = 0; i < dim(); ++i) lp += comps_[i].log_pdf(x[i]);
    return lp;
  }

 private:
  std::vector<PriorComponent> comps_;
  std::vector<std::string> names_;
};

}  // namespace lfhmm
