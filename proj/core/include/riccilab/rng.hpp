#pragma once

#include <cstdint>
#include <random>

#include "riccilab/types.hpp"

namespace riccilab {

/// Derives an independent stream seed from a master seed. SplitMix64
/// finalizer applied to (master, stream); the same pair always yields the
/// same seed, regardless of how work is scheduled.
std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream);

/// mt19937_64 with portable conversions to doubles (the std distributions are
/// implementation-defined, which would break byte-identical reruns across
/// standard libraries).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  /// Uniform direction on the unit sphere S^{n-1} in R^n.
  Vec unit_vector(int n);
  /// Uniform point in the closed unit ball of R^n.
  Vec in_unit_ball(int n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace riccilab
