#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace splitbargain {

/// Deterministic random stream. All distribution draws are derived from the raw
/// mt19937_64 output with fixed bit arithmetic, so results are identical across
/// platforms and standard-library implementations (std::uniform_real_distribution
/// et al. are not portable). Independent child streams can be split off with
/// derive(), which is how per-device / per-field reproducibility is kept stable
/// when one parameter changes and the others must not.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

  /// Independent stream keyed by (seed, stream_id). Same inputs, same stream.
  RngStream derive(std::uint64_t stream_id) const {
    return RngStream(splitmix64(seed_ + 0x9E3779B97F4A7C15ULL * (stream_id + 1)));
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; degenerate lo == hi returns exactly lo.
  double uniform(double lo, double hi) { return lo + uniform01() * (hi - lo); }

  /// Exponential with mean 1 (inverse transform; argument of log1p is in (-1, 0]).
  double exponential_mean1() { return -std::log1p(-uniform01()); }

  /// Uniform integer in [0, n) by rejection; n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Fisher-Yates shuffle with portable draws (std::shuffle is not reproducible
  /// across standard libraries).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace splitbargain
