#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace galforge {

// splitmix64 finalizer; full-period mixer used both as the RNG core and for
// stateless seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Stateless seed split: derives an independent stream id from (seed, key).
// Chain calls for more keys. Never uses global state, so skipping a stage
// cannot shift the seeds of later stages.
constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t key) {
  return mix64(seed ^ mix64(key + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2) {
  return seed_mix(seed_mix(seed, k1), k2);
}

constexpr std::uint64_t seed_mix(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2,
                                 std::uint64_t k3) {
  return seed_mix(seed_mix(seed, k1, k2), k3);
}

// Deterministic generator with a documented output sequence. Distributions
// are implemented here rather than via <random> so identical seeds give
// identical streams on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform double in [0, 1) with 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // unbiased integer in [0, n); n == 0 is a caller bug and returns 0
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
  }

  // standard normal via Box-Muller; draws exactly two uniforms per call so
  // the stream layout is fixed (no cached second value)
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_;
};

}  // namespace galforge
