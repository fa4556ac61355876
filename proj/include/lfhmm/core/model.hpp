#pragma once

// ImplicitHmm is the single boundary between inference code and simulators.
// A model provides forward sampling of transitions and observations plus the
// observation density (all experiments here have additive Gaussian noise, so
// the density is available even when the transition is simulation-only).
//
// The public non-virtual entry points count calls; budgets and run records
// read those counters, so inference code must go through them rather than the
// protected virtuals.

#include "lfhmm/core/prior.hpp"
#include "lfhmm/core/rng.hpp"
#include "lfhmm/core/types.hpp"

#include <atomic>
#include <cstdint>
#include <string>

namespace lfhmm {

struct SimCallCounts {
  std::uint64_t joint = 0;
  std::uint64_t transitions = 0;
  std::uint64_t observations = 0;
};

class ImplicitHmm {
 public:
  virtual ~ImplicitHmm() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;
  virtual const Vector& times() const = 0;  // length M, strictly increasing
  virtual const Prior& prior() const = 0;
  virtual Vector initial_state(const ParamVector& theta) const = 0;
  virtual bool has_obs_density() const { return false; }

  int length() const { return static_cast<int>(times().size()); }

  ParamVector make_params(Vector values) const {
    ParamVector p(std::move(values), prior().names());
    p.initial_state = initial_state(p);
    return p;
  }

  // X_t | X_{t-1}; step is the destination index t in [1, M-1].
  Vector transition(const Vector& x_prev, const ParamVector& theta, int step,
                    RngStream& rng) const {
    transition_calls_.fetch_add(1, std::memory_order_relaxed);
    return sample_transition(x_prev, theta, step, rng);
  }

  Vector observe(const Vector& x, const ParamVector& theta, int step,
                 RngStream& rng) const {
    observation_calls_.fetch_add(1, std::memory_order_relaxed);
    return sample_observation(x, theta, step, rng);
  }

  double log_obs_density(const Vector& y, const Vector& x, const ParamVector& theta,
                         int step) const {
    if (!has_obs_density()) throw Error(name() + ": observation density unavailable");
    return obs_log_density(y, x, theta, step);
  }

  void count_joint_call() const { joint_calls_.fetch_add(1, std::memory_order_relaxed); }

  SimCallCounts counts() const {
    return {joint_calls_.load(std::memory_order_relaxed),
            transition_calls_.load(std::memory_order_relaxed),
            observation_calls_.load(std::memory_order_relaxed)};
  }

  void reset_counts() const {
    joint_calls_.store(0, std::memory_order_relaxed);
    transition_calls_.store(0, std::memory_order_relaxed);
    observation_calls_.store(0, std::memory_order_relaxed);
  }

 protected:
  virtual Vector sample_transition(const Vector& x_prev, const ParamVector& theta,
                                   int step, RngStream& rng) const = 0;
  virtual Vector sample_observation(const Vector& x, const ParamVector& theta,
                                    int step, RngStream& rng) const = 0;
  virtual double obs_log_density(const Vector& y, const Vector& x,
                                 const ParamVector& theta, int step) const {
    (void)y; (void)x; (void)theta; (void)step;
    throw Error(name() + ": observation density unavailable");
  }

 private:
  mutable std::atomic<std::uint64_t> joint_calls_{0};
  mutable std::atomic<std::uint64_t> transition_calls_{0};
  mutable std::atomic<std::uint64_t> observation_calls_{0};
};

}  // namespace lfhmm
