#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "riccilab/geodesic.hpp"

namespace riccilab {

/// d(p0, x) + d(p1, x) - d(p0, p1), with roundoff below zero (up to 1e-8)
/// clamped to 0.
double excess_value(const Manifold& m, const Vec& p0, const Vec& p1, const Vec& x, const GeodesicOptions& opts = {});

struct ExcessSample {
  Vec p0;
  Vec p1;
  Vec x;
  double e = 0.0;
};

struct MaxExcess {
  double value = 0.0;
  ExcessSample argmax;
  int samples = 0;
};

/// Largest excess over n_samples seeded uniform points.
MaxExcess max_excess(const Manifold& m, const Vec& p0, const Vec& p1, int n_samples, std::uint64_t seed,
                     const GeodesicOptions& opts = {});

/// (18/19) acos(-1 - (e^2 - 4 e t) / (2 t^2)) for t > 0, 0 <= e <= 2t.
double regularity_angle_bound(double t, double e);

struct RegularityReport {
  double min_angle = 0.0;  ///< over all near-minimal pairs x -> p, x -> q
  bool regular = false;    ///< min_angle > pi/2
  double d_xp = 0.0;
  double d_xq = 0.0;
  double excess = 0.0;        ///< e_{p,q}(x)
  double step = 0.0;          ///< s = min(rac/4, delta)
  double inner_excess = 0.0;  ///< e_{p',q'}(x) with p', q' at distance s from x
  double predicted_bound = 0.0;
  int pairs = 0;
};

/// Raises precondition_violated when x lies within delta of p or q.
RegularityReport check_regular_point(const Manifold& m, const Vec& p, const Vec& q, const Vec& x, double delta,
                                     std::optional<double> rac = std::nullopt, const GeodesicOptions& opts = {});

std::string excess_csv_header();
std::string excess_csv_row(const ExcessSample& s, const RegularityReport& rep);

}  // namespace riccilab
