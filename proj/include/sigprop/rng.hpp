#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace sigprop {

/// SplitMix64 finaliser.
std::uint64_t splitmix64(std::uint64_t x);

/// Stream seed for a task identified by integer indices:
///   h = splitmix64(base ^ 0x5eed5eed5eed5eed)
///   for each index i: h = splitmix64(h ^ (i + 0x9e3779b97f4a7c15))
/// Distinct index tuples give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> indices);

/// Private random stream: mt19937_64 plus a Box-Muller normal sampler whose
/// output depends only on the engine sequence (std::normal_distribution is
/// implementation-defined across standard libraries).
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in (0, 1), 53 random bits.
  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace sigprop
