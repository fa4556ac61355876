#pragma once

// Joint forward simulation of (X, y) and prior draws bundled with their
// density, the two primitives every likelihood-free method builds on.

#include "lfhmm/core/model.hpp"

#include <utility>

namespace lfhmm {

// Simulates a full latent path and observation series under theta. Row 0 of
// the path is the known initial state X_0 and y_0 observes it, so both have
// the model's full M rows. Divergence inside the transition kernel propagates
// as SimulationDiverged.
inline std::pair<StatePath, ObsSeries> simulate_joint(const ImplicitHmm& model,
                                                      const ParamVector& theta,
                                                      RngStream& rng) {
  model.count_joint_call();
  const Vector& t = model.times();
  const int m = model.length();
  Matrix states(m, model.state_dim());
  Matrix obs(m, model.obs_dim());

  states.row(0) = model.initial_state(theta).transpose();
  obs.row(0) = model.observe(states.row(0).transpose(), theta, 0, rng).transpose();
  for (int step = 1; step < m; ++step) {
    states.row(step) =
        model.transition(states.row(step - 1).transpose(), theta, step, rng).transpose();
    obs.row(step) = model.observe(states.row(step).transpose(), theta, step, rng).transpose();
  }
  return {StatePath(std::move(states), t), ObsSeries(std::move(obs), t)};
}

// Prior draw together with its log-density, packaged as a ParamVector with the
// model-facing names. The density comes for free at sampling time and several
// callers (ABC weights, MCMC initialisation) need both.
inline std::pair<ParamVector, double> prior_sample_and_logpdf(const Prior& prior,
                                                              RngStream& rng) {
  Vector v = prior.sample(rng);
  double lp = prior.log_pdf(v);
  return {ParamVector(std::move(v), prior.names()), lp};
}

}  // namespace lfhmm
