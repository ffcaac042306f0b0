#pragma once

// Portable sampling helpers on top of std::mt19937_64.
//
// The engine's output sequence is fixed by the standard, but the standard
// distributions are not, so generated experiments would differ between
// library implementations. Everything that must be byte-reproducible goes
// through these helpers instead.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace fewshot {

using Rng = std::mt19937_64;

/// Uniform integer in [0, n). Rejection sampling, unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = Rng::max() - (Rng::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Fisher-Yates.
template <typename T, std::size_t N>
void shuffle(std::span<T, N> xs, Rng& rng) {
  for (std::size_t i = xs.size(); i > 1; --i) {
    const auto j = uniform_index(rng, i);
    std::swap(xs[i - 1], xs[j]);
  }
}

/// Index drawn proportionally to nonnegative weights. Weights need not sum to 1.
inline std::size_t weighted_index(Rng& rng, std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i > 0; --i)
    if (weights[i - 1] > 0) return i - 1;
  return 0;
}

/// SplitMix64 finalizer; derives independent child seeds from (seed, stream).
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace fewshot
