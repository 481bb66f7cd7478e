#pragma once

#include <cstdint>
#include <string_view>

namespace ramanmix {

/// Counter-based 64-bit generator.
///
/// The n-th output (n = 1, 2, ...) of a stream with key k is
/// mix(k + n * 0x9E3779B97F4A7C15),
/// where mix is the SplitMix64 finalizer. Outputs are therefore a pure
/// function of (key, counter), which makes streams cheap to derive and
/// trivially reproducible. Distributions are implemented here rather than
/// taken from <random> because the standard distributions are not specified
/// bit-for-bit across library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t key = 0) : key_(key) {}

  /// Derives an independent stream for a named stage: key = mix(seed ^ hash(tag)).
  static Rng stream(std::uint64_t seed, std::string_view tag);

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal via Box-Muller (cached second variate).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Exp(1), i.e. Gamma(1, 1).
  double exponential();
  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace ramanmix
