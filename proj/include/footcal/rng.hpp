#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace footcal {

/// Counter-style generator with O(1) stream derivation. Every random draw in
/// the library goes through this so that runs are reproducible across
/// platforms and independent of execution order (no shared generator state).
class SplitMix64 {
public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t state) : state_(state) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~std::uint64_t{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

private:
  std::uint64_t state_;
};

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
  // One SplitMix64 scramble of (a ^ rotated b); cheap and well dispersed.
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic substream keyed by two indices (e.g. particle, step).
inline SplitMix64 substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return SplitMix64(mix_u64(mix_u64(seed, a), b));
}

/// Uniform double in [0, 1), 53 mantissa bits.
inline double uniform01(SplitMix64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct NormalPair {
  double first;
  double second;
};

/// Two independent standard normal draws (Box-Muller). The first uniform is
/// mapped into (0, 1] so the log is always finite.
inline NormalPair normal_pair(SplitMix64& rng) {
  const double u1 = static_cast<double>((rng() >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

}  // namespace footcal
