#pragma once

// Counter-based splittable random streams.
//
// Every stochastic routine in the library takes an explicit RngStream. Streams
// are cheap value types built on splitmix64: a stream is (state, increment)
// where the increment is derived from the stream id, so distinct ids walk
// distinct orbits. derive() produces statistically independent child streams
// from a parent without touching the parent's own sequence, which is what
// makes results independent of worker count: work item i always uses
// parent.derive(i) no matter which thread runs it.
//
// Distributions are implemented here instead of <random> because libstdc++
// distributions keep hidden state (normal_distribution caches a spare value)
// and their algorithms are not pinned across standard library versions.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace lfhmm {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

// Variant mixer used for increments; forces the result odd so the additive
// walk has full period.
inline std::uint64_t mix_gamma(std::uint64_t z) {
  z ^= z >> 33;
  z *= 0xff51afd7ed558ccdull;
  z ^= z >> 33;
  z *= 0xc4ceb9fe1a85ec53ull;
  z ^= z >> 33;
  return z | 1ull;
}

inline std::uint64_t hash_name(std::string_view s) {
  // FNV-1a, good enough to map stage names to stream ids.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace detail

class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id) {
    state_ = detail::mix64(seed + detail::golden_gamma) ^ detail::mix64(stream_id);
    inc_ = detail::mix_gamma(detail::mix64(stream_id + detail::golden_gamma) + seed);
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Child stream with an id derived from (this stream id, key). Children of
  // distinct keys, and children vs. the parent, are independent for all
  // practical purposes.
  RngStream derive(std::uint64_t key) const {
    return RngStream(seed_, detail::mix64(stream_id_ ^ detail::mix64(key + detail::golden_gamma)));
  }
  RngStream derive(std::string_view name) const { return derive(detail::hash_name(name)); }

  std::uint64_t next_u64() {
    state_ += inc_;
    return detail::mix64(state_);
  }

  // Uniform on the open interval (0,1); never returns 0 or 1 exactly, so it
  // is safe inside logs and inverse CDFs.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller without caching the second variate: two uniforms per normal,
  // deterministic draw count.
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential(double rate) {
    if (!(rate > 0.0)) throw std::invalid_argument("exponential: rate must be > 0");
    return -std::log(uniform01()) / rate;
  }

  // Marsaglia-Tsang squeeze for shape >= 1, with the standard boost for
  // shape < 1. Parameterised by rate (inverse scale), matching the priors.
  double gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0))
      throw std::invalid_argument("gamma: shape and rate must be > 0");
    if (shape < 1.0) {
      double u = uniform01();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double t = 1.0 + c * x;
      if (t <= 0.0) continue;
      double v = t * t * t;
      double u = uniform01();
      double x2 = x * x;
      if (u < 1.0 - 0.0331 * x2 * x2) return d * v / rate;
      if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double beta(double a, double b) {
    double ga = gamma(a, 1.0);
    double gb = gamma(b, 1.0);
    return ga / (ga + gb);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = detail::golden_gamma;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
};

}  // namespace lfhmm
