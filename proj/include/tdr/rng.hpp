#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

#include "tdr/common.hpp"

namespace tdr {

// All randomness in the toolkit flows through this one generator so that
// outputs are bit-reproducible across toolchains. std::mt19937 would pin the
// engine but not the distributions (normal_distribution is implementation
// defined), hence the hand-rolled SplitMix64 + Box-Muller below.
//
// SplitMix64 is the mixer from Steele, Lea & Flood, "Fast splittable
// pseudorandom number generators" (OOPSLA 2014).
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). The float detour keeps the draw portable; the
  // bias is O(n / 2^53), irrelevant at the sizes used here.
  std::uint64_t below(std::uint64_t n) {
    const auto r = static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
    return r >= n ? n - 1 : r;
  }

  // Standard normal via Box-Muller, cosine branch only, so every draw
  // consumes exactly two uniforms regardless of caller history.
  double gaussian() {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log() finite
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  double exponential(double scale) { return -scale * std::log(1.0 - uniform()); }

  // Knuth-style inversion; only used for small means (rain arrivals).
  int poisson(double mean) {
    if (mean < 0.0) throw argument_error("poisson: mean must be >= 0");
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    while (true) {
      p *= uniform();
      if (p <= limit) return k;
      ++k;
    }
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925287;
  std::uint64_t state_;
};

// 64-bit FNV-1a over the tag bytes.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// SplitMix64 finalizer, used as the mixing step of derive_seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Hierarchical seed derivation. Every random stream is keyed by a parent
// seed, a purpose tag and up to two integer indices:
//
//   derive_seed(base, tag, a, b) = mix(mix(mix(base ^ fnv1a(tag)) + a) + b)
//
// so independent purposes never share a stream and per-day / per-tree
// streams can be regenerated in isolation.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix64(base ^ fnv1a(tag));
  s = mix64(s + 0x9E3779B97F4A7C15ull * (a + 1));
  s = mix64(s + 0x9E3779B97F4A7C15ull * (b + 1));
  return s;
}

// Fisher-Yates shuffle driven by SplitMix64.
template <class T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct indices from [0, n), ascending.
std::vector<int> sample_without_replacement(int n, int k, SplitMix64& rng);

}  // namespace tdr
