#pragma once

// Deterministic random number generation. Streams are derived from a root
// seed via SplitMix64 so that parallel consumers (bootstrap replicates,
// simulation replications) draw from independent, order-free sequences and
// every result is bit-reproducible across platforms and worker counts.

#include <cstdint>
#include <random>

#include "sbss/errors.hpp"
#include "sbss/special.hpp"

namespace sbss {

// One SplitMix64 step; also used to hash (seed, stream) pairs.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(mix_seed(seed)) {}

  // Independent substream: hash of (root_seed, stream_id).
  static Rng stream(std::uint64_t root_seed, std::uint64_t stream_id) {
    std::uint64_t s = root_seed;
    std::uint64_t a = splitmix64(s);
    s ^= stream_id * 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = splitmix64(s);
    return Rng(a ^ (b + 0x632be59bd9b4e019ULL));
  }

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on the open interval (0, 1).
  double uniform01() {
    for (;;) {
      double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via the inverse CDF (keeps draws reproducible and
  // single-stream, unlike rejection samplers).
  double normal() { return normal_quantile(uniform01()); }

  // Uniform integer on {0, ..., n-1}, bias-free by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    const std::uint64_t limit = (UINT64_MAX / n) * n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Gamma(shape, 1) for integer shape, as a sum of exponentials.
  double gamma_int(int shape) {
    if (shape < 1) throw ValidationError("Rng::gamma_int: shape must be >= 1");
    double log_prod = 0.0;
    for (int i = 0; i < shape; ++i) log_prod += std::log(uniform01());
    return -log_prod;
  }

  // Beta(a, b) for integer shapes via two gamma draws.
  double beta(int a, int b) {
    double g1 = gamma_int(a);
    double g2 = gamma_int(b);
    return g1 / (g1 + g2);
  }

 private:
  static std::uint64_t mix_seed(std::uint64_t seed) {
    std::uint64_t s = seed;
    return splitmix64(s);
  }

  std::mt19937_64 eng_;
};

}  // namespace sbss
