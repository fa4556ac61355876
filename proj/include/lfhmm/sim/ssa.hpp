#pragma once

// Gillespie's direct stochastic simulation algorithm for reaction networks,
// recorded on a fixed time grid (the state reported at grid time t is the
// state after the last event at or before t).

#include "lfhmm/core/rng.hpp"
#include "lfhmm/core/types.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace lfhmm {

struct ReactionNetwork {
  // stoichiometry(i, j): change in species i when reaction j fires.
  Eigen::MatrixXi stoichiometry;
  // hazard(state, rates)[j] >= 0 for each reaction j.
  std::function<Vector(const Vector& state, const Vector& rates)> hazard;
  int rate_count = 0;
  std::vector<std::string> species;

  int species_count() const { return static_cast<int>(stoichiometry.rows()); }
  int reaction_count() const { return static_cast<int>(stoichiometry.cols()); }
};

struct SsaOptions {
  // Hard cap on simulated reaction events; hitting it means the trajectory is
  // exploding (e.g. unchecked exponential growth) and raises SimulationDiverged.
  std::uint64_t event_cap = 10'000'000;
};

// Simulates the network from x0 at record_times[0] and returns the state at
// each grid time. Throws SimulationDiverged carrying the index of the first
// grid point that could not be reached; the what() string reports events used.
inline StatePath ssa_simulate(const ReactionNetwork& net, const Vector& rates,
                              const Vector& x0, const Vector& record_times,
                              RngStream& rng, const SsaOptions& opts = {}) {
  require(net.hazard != nullptr, "ssa_simulate: network has no hazard function");
  require(rates.size() == net.rate_count, "ssa_simulate: rate vector has wrong length");
  require(x0.size() == net.species_count(), "ssa_simulate: x0 has wrong length");
  require(record_times.size() >= 1 && strictly_increasing(record_times),
          "ssa_simulate: record times must be strictly increasing");
  for (Eigen::Index i = 0; i < rates.size(); ++i)
    require(rates[i] >= 0.0, "ssa_simulate: rates must be non-negative");

  const int m = static_cast<int>(record_times.size());
  const int v = net.reaction_count();
  Matrix recorded(m, net.species_count());
  recorded.row(0) = x0.transpose();

  Vector x = x0;
  double t = record_times[0];
  std::uint64_t events = 0;
  int next_record = 1;

  while (next_record < m) {
    Vector h = net.hazard(x, rates);
    double h0 = 0.0;
    for (int j = 0; j < v; ++j) {
      require(h[j] >= 0.0, "ssa_simulate: negative hazard");
      h0 += h[j];
    }

    if (h0 <= 0.0) {
      // Absorbing state: the remaining grid sees the current state forever.
      for (; next_record < m; ++next_record) recorded.row(next_record) = x.transpose();
      break;
    }

    double dt = rng.exponential(h0);
    double t_next = t + dt;
    // Fill every grid point the jump passes over with the pre-jump state.
    while (next_record < m && record_times[next_record] < t_next) {
      recorded.row(next_record) = x.transpose();
      ++next_record;
    }
    if (next_record >= m) break;

    // Pick the firing reaction proportional to its hazard.
    double u = rng.uniform01() * h0;
    int j = 0;
    double acc = h[0];
    while (j + 1 < v && u > acc) acc += h[++j];

    x += net.stoichiometry.col(j).cast<double>();
    t = t_next;

    if (++events >= opts.event_cap) {
      throw SimulationDiverged(
          "ssa_simulate: event cap " + std::to_string(opts.event_cap) +
              " reached at t=" + std::to_string(t) + " before grid index " +
              std::to_string(next_record),
          next_record);
    }
  }
  return StatePath(std::move(recorded), record_times);
}

}  // namespace lfhmm
