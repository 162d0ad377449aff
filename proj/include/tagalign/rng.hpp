#pragma once

#include <cstdint>
#include <cmath>

namespace tagalign {

/// Deterministic, splittable PRNG used for synthetic scene generation.
///
/// Algorithm (fixed for reproducibility across platforms and releases):
///   - state update: xoshiro256++ (Blackman & Vigna)
///   - seeding: four rounds of splitmix64 over the user seed
///   - substreams: fork(label) reseeds from splitmix64(seed ^ label)
///   - uniform doubles: top 53 bits scaled by 2^-53
///   - normals: Box-Muller on two fresh uniforms (no caching)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
  }

  /// Independent substream; deterministic in (seed, label).
  Rng fork(std::uint64_t label) const {
    std::uint64_t mix = seed_;
    (void)splitmix64(mix);
    return Rng(mix ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) {
    // multiply-shift; bias negligible for bound << 2^64 and irrelevant here
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
  }

  double normal(double mean = 0.0, double sigma = 1.0) {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  static std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t state_[4];
};

}  // namespace tagalign
