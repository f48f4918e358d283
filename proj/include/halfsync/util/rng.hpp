#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace halfsync::util {

/// Deterministic generator used everywhere a seed is involved.
///
/// Wraps std::mt19937_64 (whose output sequence is fixed by the standard) and
/// derives every distribution by hand, because the standard distributions are
/// implementation-defined and would break cross-toolchain reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Mixes a parent seed with a stream id (splitmix64 finalizer).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, bound), bound > 0, unbiased.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller (no cached second value).
  double normal();
  bool bernoulli(double p) { return uniform01() < p; }

  /// Fisher-Yates shuffle.
  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <class T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace halfsync::util
