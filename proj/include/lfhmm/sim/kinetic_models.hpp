#pragma once

// Stochastic kinetic benchmark models wrapped as implicit HMMs: a Lotka-
// Volterra predator-prey system and a reduced prokaryotic autoregulatory
// network. Transitions run the exact Gillespie algorithm between consecutive
// grid times; observations add Gaussian noise to a linear readout of the
// state, so the observation density is available in closed form.

#include "lfhmm/core/model.hpp"
#include "lfhmm/sim/ssa.hpp"
#include "lfhmm/sim/ssm.hpp"

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lfhmm {

// Prey/predator: R1 prey birth, R2 predation, R3 predator death.
inline ReactionNetwork lv_network() {
  ReactionNetwork net;
  net.stoichiometry.resize(2, 3);
  net.stoichiometry << 1, -1, 0,
                       0,  1, -1;
  net.rate_count = 3;
  net.species = {"prey", "predator"};
  net.hazard = [](const Vector& x, const Vector& c) {
    Vector h(3);
    h[0] = c[0] * x[0];
    h[1] = c[1] * x[0] * x[1];
    h[2] = c[2] * x[1];
    return h;
  };
  return net;
}

// Reduced autoregulatory network over (RNA, P, P2, DNA) with the conservation
// law DNA + DNA.P2 = k used to eliminate the bound-operator species:
//   R1 DNA + P2 -> DNA.P2        c1 * DNA * P2
//   R2 DNA.P2 -> DNA + P2        c2 * (k - DNA)
//   R3 DNA -> DNA + RNA          c3 * DNA
//   R4 RNA -> RNA + P            c4 * RNA
//   R5 2P -> P2                  c5 * P (P - 1) / 2
//   R6 P2 -> 2P                  c6 * P2
//   R7 RNA -> 0                  c7 * RNA
//   R8 P -> 0                    c8 * P
inline ReactionNetwork pky_network(int k = 10) {
  require(k >= 1, "pky_network: operator copy number k must be >= 1");
  ReactionNetwork net;
  net.stoichiometry.resize(4, 8);
  //                    R1  R2  R3  R4  R5  R6  R7  R8
  net.stoichiometry <<   0,  0,  1,  0,  0,  0, -1,  0,   // RNA
                         0,  0,  0,  1, -2,  2,  0, -1,   // P
                        -1,  1,  0,  0,  1, -1,  0,  0,   // P2
                        -1,  1,  0,  0,  0,  0,  0,  0;   // DNA
  net.rate_count = 8;
  net.species = {"rna", "p", "p2", "dna"};
  net.hazard = [k](const Vector& x, const Vector& c) {
    const double rna = x[0], p = x[1], p2 = x[2], dna = x[3];
    Vector h(8);
    h[0] = c[0] * dna * p2;
    h[1] = c[1] * (k - dna);
    h[2] = c[2] * dna;
    h[3] = c[3] * rna;
    h[4] = c[4] * p * (p - 1.0) / 2.0;
    h[5] = c[5] * p2;
    h[6] = c[6] * rna;
    h[7] = c[7] * p;
    return h;
  };
  return net;
}

inline Vector lv_generative_rates() {
  Vector c(3);
  c << 0.3, 0.0025, 0.5;
  return c;
}

inline Vector pky_generative_rates() {
  Vector c(8);
  c << 0.1, 0.7, 0.35, 0.2, 0.1, 0.9, 0.3, 0.1;
  return c;
}

struct KineticModelOptions {
  // Per-segment event cap; generous for in-regime trajectories (< 1e4 events
  // per unit time) while cutting off exploding ones early.
  std::uint64_t event_cap = 1'000'000;
};

namespace detail {

class KineticHmm final : public ImplicitHmm {
 public:
  KineticHmm(std::string name, ReactionNetwork net, Prior prior, Vector x0,
             Vector times, Matrix obs_map, double obs_sd, KineticModelOptions opts)
      : name_(std::move(name)),
        net_(std::move(net)),
        prior_(std::move(prior)),
        x0_(std::move(x0)),
        times_(std::move(times)),
        obs_map_(std::move(obs_map)),
        obs_sd_(obs_sd),
        opts_(opts) {
    require(obs_map_.cols() == net_.species_count(), "KineticHmm: bad observation map");
  }

  std::string name() const override { return name_; }
  int state_dim() const override { return net_.species_count(); }
  int obs_dim() const override { return static_cast<int>(obs_map_.rows()); }
  const Vector& times() const override { return times_; }
  const Prior& prior() const override { return prior_; }
  Vector initial_state(const ParamVector&) const override { return x0_; }
  bool has_obs_density() const override { return true; }

  const ReactionNetwork& network() const { return net_; }

 protected:
  Vector sample_transition(const Vector& x_prev, const ParamVector& theta, int step,
                           RngStream& rng) const override {
    Vector grid(2);
    grid << times_[step - 1], times_[step];
    SsaOptions ssa_opts;
    ssa_opts.event_cap = opts_.event_cap;
    try {
      StatePath seg = ssa_simulate(net_, theta.values, x_prev, grid, rng, ssa_opts);
      return seg.states.row(1).transpose();
    } catch (const SimulationDiverged& e) {
      // Re-throw with the model-level time index, which is more useful to
      // callers than the 2-point segment index.
      throw SimulationDiverged(name_ + ": " + e.what(), step);
    }
  }

  Vector sample_observation(const Vector& x, const ParamVector&, int,
                            RngStream& rng) const override {
    Vector y = obs_map_ * x;
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += obs_sd_ * rng.normal();
    return y;
  }

  double obs_log_density(const Vector& y, const Vector& x, const ParamVector&,
                         int) const override {
    return gaussian_iso_logpdf(y, obs_map_ * x, obs_sd_);
  }

 private:
  std::string name_;
  ReactionNetwork net_;
  Prior prior_;
  Vector x0_;
  Vector times_;
  Matrix obs_map_;
  double obs_sd_;
  KineticModelOptions opts_;
};

}  // namespace detail

// Lotka-Volterra: both species observed with N(0, 100) noise at t = 0..49,
// X_0 = (100, 100) known. Priors c1 ~ Beta(1,2), c2 ~ U(0.0015, 0.005),
// c3 ~ Beta(2,1); the generative rates are (0.3, 0.0025, 0.5).
inline std::unique_ptr<ImplicitHmm> lv_model(KineticModelOptions opts = {}) {
  Prior prior({PriorComponent::make_beta(1.0, 2.0),
               PriorComponent::make_uniform(0.0015, 0.005),
               PriorComponent::make_beta(2.0, 1.0)},
              {"c1", "c2", "c3"});
  Vector x0(2);
  x0 << 100.0, 100.0;
  Vector times = Vector::LinSpaced(50, 0.0, 49.0);
  Matrix obs_map = Matrix::Identity(2, 2);
  return std::make_unique<detail::KineticHmm>("lv", lv_network(), std::move(prior),
                                              std::move(x0), std::move(times),
                                              std::move(obs_map), 10.0, opts);
}

// Prokaryotic autoregulator (reduced): total protein P + 2 P2 observed with
// N(0, 4) noise at t = 0, 0.5, ..., 49.5, X_0 = (8, 8, 8, 5) known, k = 10.
// Gamma(2, 3) prior on each of the eight rate constants.
inline std::unique_ptr<ImplicitHmm> pky_model(KineticModelOptions opts = {}) {
  std::vector<PriorComponent> comps(8, PriorComponent::make_gamma(2.0, 3.0));
  std::vector<std::string> names;
  for (int i = 1; i <= 8; ++i) names.push_back("c" + std::to_string(i));
  Prior prior(std::move(comps), std::move(names));
  Vector x0(4);
  x0 << 8.0, 8.0, 8.0, 5.0;
  Vector times = Vector::LinSpaced(100, 0.0, 49.5);
  Matrix obs_map(1, 4);
  obs_map << 0.0, 1.0, 2.0, 0.0;
  return std::make_unique<detail::KineticHmm>("pky", pky_network(10), std::move(prior),
                                              std::move(x0), std::move(times),
                                              std::move(obs_map), 2.0, opts);
}

}  // namespace lfhmm
