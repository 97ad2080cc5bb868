#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace riccilab {

/// Ric >= (n-1) H, conjugate radius >= r0, diameter <= D, angle comparison
/// radius rac.
struct BoundInputs {
  int n = 2;
  double H = 0.0;
  double r0 = 1.0;
  double D = 1.0;
  double rac = 1.0;
};

void validate(const BoundInputs& in);

/// Astronomically large integers are carried as log2; `exact` is filled when
/// the value fits in 63 bits.
struct BoundValue {
  double log2 = 0.0;
  std::optional<std::uint64_t> exact;

  std::string to_string(bool log_scale) const;
};

/// Volume of the r-ball in the simply connected space of curvature H
/// (r is capped at pi / sqrt(H) when H > 0).
double model_volume(int n, double H, double r);

struct CoveringNumbers {
  double N1 = 0.0;  ///< number of eps-balls covering an r-ball (integral value)
  double N2 = 0.0;  ///< multiplicity of that covering (integral value)
};

/// N1 = ceil(V(r + eps/2) / V(eps/2)), N2 = ceil(V(5 eps/2) / V(eps/2)).
CoveringNumbers covering_number(int n, double H, double r, double eps);

/// floor(packing_count(n, cpe_angle_lower_bound(5/4))).
int rank_bound(int n);
inline int rank_bound(const BoundInputs& in) { return rank_bound(in.n); }

struct BoundLevel {
  int level = 0;
  double r = 0.0;
  double eps = 0.0;
  double N1 = 0.0;
  double N2 = 0.0;
  /// log2((n+1) 2^{N1}).
  double log2_factor = 0.0;
  /// log2 of the bound when the recursion stops at this level; absent above
  /// the base-case radius.
  std::optional<double> log2_bound;
  bool chosen = false;
};

struct BoundTrace {
  BoundInputs inputs;
  double H_eff = 0.0;
  int rank = 0;
  double base_divisor = 20.0;
  double base_radius = 0.0;  ///< rac / base_divisor
  std::vector<BoundLevel> levels;
  int chosen_level = 0;
  BoundValue value;
};

struct BettiOptions {
  /// Base case allowed once r <= rac / base_divisor.
  double base_divisor = 20.0;
  /// Levels examined beyond the first admissible one.
  int extra_levels = 40;
};

/// Upper bound on the total Betti number, with the full derivation.
BoundTrace betti_bound(const BoundInputs& in, const BettiOptions& opts = {});

struct Pi1Bound {
  double r1 = 0.0;
  double N1 = 0.0;
  int per_ball = 0;  ///< floor((19/3)^{n-1})
  BoundValue value;
};

/// N1(n, H, D, r1) * floor((19/3)^{n-1}) with r1 = min(rac, r0) / 6.
Pi1Bound pi1_generator_bound(const BoundInputs& in);

/// One JSON object per level, then a summary object.
std::string trace_jsonl(const BoundTrace& trace);
std::string trace_table(const BoundTrace& trace, bool log_scale);

}  // namespace riccilab
