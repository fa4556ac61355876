#pragma once

// Shared value types: parameter vectors, latent state paths, observation
// series, and the error hierarchy. Paths and series carry their time grids so
// downstream code never has to guess spacing.

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lfhmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised by simulators when a trajectory leaves the tractable regime (event
// cap hit, non-finite state). Carries how far the simulation got.
struct SimulationDiverged : Error {
  SimulationDiverged(std::string msg, int index)
      : Error(std::move(msg)), time_index(index) {}
  int time_index = 0;
};

struct TrainingError : Error {
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline bool strictly_increasing(const Vector& t) {
  for (Eigen::Index i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) return false;
  return true;
}

// Model parameters theta = (rate/noise parameters, optionally a fixed known
// initial state X0 that is part of the model definition rather than inferred).
struct ParamVector {
  Vector values;
  std::vector<std::string> names;
  std::optional<Vector> initial_state;

  ParamVector() = default;
  ParamVector(Vector v, std::vector<std::string> n,
              std::optional<Vector> x0 = std::nullopt)
      : values(std::move(v)), names(std::move(n)), initial_state(std::move(x0)) {
    require(static_cast<std::size_t>(values.size()) == names.size(),
            "ParamVector: values/names size mismatch");
  }

  int dim() const { return static_cast<int>(values.size()); }

  double operator[](int i) const { return values[i]; }
};

// Latent trajectory including the (known) initial state in row 0, so states
// has M rows for a series of length M and states.row(t) is X_t.
struct StatePath {
  Matrix states;  // M x K
  Vector times;   // M

  StatePath() = default;
  StatePath(Matrix s, Vector t) : states(std::move(s)), times(std::move(t)) {
    require(states.rows() == times.size(), "StatePath: rows must match times");
    require(strictly_increasing(times), "StatePath: times must be strictly increasing");
  }

  int length() const { return static_cast<int>(states.rows()); }
  int state_dim() const { return static_cast<int>(states.cols()); }
};

struct ObsSeries {
  Matrix observations;  // M x L
  Vector times;         // M

  ObsSeries() = default;
  ObsSeries(Matrix y, Vector t) : observations(std::move(y)), times(std::move(t)) {
    require(observations.rows() == times.size(), "ObsSeries: rows must match times");
    require(strictly_increasing(times), "ObsSeries: times must be strictly increasing");
  }

  int length() const { return static_cast<int>(observations.rows()); }
  int obs_dim() const { return static_cast<int>(observations.cols()); }
};

}  // namespace lfhmm
