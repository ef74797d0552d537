#pragma once

#include <cstdint>
#include <random>

namespace asyvrsc {

/// Stream tags used to derive independent generators from one user seed.
enum class Stream : std::uint64_t {
  kAnchor = 1,
  kCoordinates = 2,
  kDelays = 3,
  kOrthogonal = 16,
  kRewards = 17,
  kMask = 18,
  kTransition = 19,
  kFeatures = 20,
  kMdpRewards = 21,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for row `index` of stream `stream`: splitmix64 chained over
/// (seed, stream, index). Every generated matrix row owns its own stream,
/// so instances do not depend on generation order.
std::uint64_t stream_seed(std::uint64_t seed, Stream stream, std::uint64_t index = 0);

/// mt19937_64 with hand-written distributions. The standard library's
/// distributions are implementation-defined; these are not, so a seed names
/// the same draws on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via Box-Muller (the second variate is cached).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace asyvrsc
