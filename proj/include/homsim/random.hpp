#pragma once

#include <cmath>
#include <cstdint>

namespace homsim {

/// SplitMix64 (Steele/Lea/Vigna). The state walks the golden-gamma sequence
/// and the output is finalized with two xor-shift multiplies. The stream is
/// fully defined by 64-bit integer arithmetic, so seeds are portable across
/// platforms.
class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  /// Poisson sample by CDF inversion with sequential search. Consumes exactly
  /// one uniform, which keeps draw counts (and hence whole timelines)
  /// reproducible. Intended for the small means of weak coherent pulses.
  unsigned poisson(double mean) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cum = p;
    unsigned k = 0;
    while (u >= cum && k < 4096) {
      ++k;
      p *= mean / static_cast<double>(k);
      cum += p;
    }
    return k;
  }

private:
  std::uint64_t state_;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
} // namespace detail

/// Derives the seed of an independent stream (replica, sweep point, ...) from
/// a base seed. Statelessly hashes (seed, stream), so any subset of streams
/// can be reproduced without running the others.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return detail::mix64(seed + 0x9E3779B97F4A7C15ULL * (stream + 1));
}

} // namespace homsim
