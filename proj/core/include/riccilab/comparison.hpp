#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "riccilab/geodesic.hpp"

namespace riccilab {

/// Sides gamma_i run from vertex p_i to p_{i+1}; alpha_i is the angle
/// opposite gamma_i, i.e. the angle at vertex p_{i+2} (indices mod 3).
struct GeodesicTriangle {
  std::array<Vec, 3> vertices;
  std::array<GeodesicPath, 3> sides;
  std::array<double, 3> lengths{};
  std::array<double, 3> angles{};
};

struct ComparisonReport {
  std::array<double, 3> comparison_angles{};
  std::array<double, 3> ratios{};
  std::array<bool, 3> degenerate{};
  double mu = 1.0;
  bool pass = false;
};

/// Model-space angle opposite l_opp in the triangle with sides
/// (l_prev, l_next, l_opp) in the simply connected space of curvature H.
double comparison_angle(double H, double l_prev, double l_next, double l_opp);

GeodesicTriangle measure_triangle(const Manifold& m, const Vec& p0, const Vec& p1, const Vec& p2,
                                  const GeodesicOptions& opts = {});

/// alpha_i > mu * (Euclidean comparison angle) at every corner whose adjacent
/// sides are at least 1e-6 long.
ComparisonReport check_toponogov(const GeodesicTriangle& t, double mu);

/// Triangle with vertices exp_p(r u), u uniform in the unit ball of an
/// orthonormal frame at p; redrawn while a side is shorter than r/20.
GeodesicTriangle random_triangle(const Manifold& m, const Vec& p, double r, std::uint64_t seed,
                                 const GeodesicOptions& opts = {});

struct RacOptions {
  GeodesicOptions geodesic{.with_samples = false};
  int bisection_steps = 12;
};

/// Largest r on the bisection grid over (0, r_max] such that n_triangles
/// seeded random triangles with vertices in the geodesic ball B_p(r) all pass
/// check_toponogov(., mu). Triangle k depends only on (seed, k) and r, so the
/// estimate is exactly equivariant under metric scaling.
double estimate_rac(const Manifold& m, const Vec& p, double mu, double r_max, int n_triangles, std::uint64_t seed,
                    const RacOptions& opts = {});

/// Header and one row of the comparison CSV.
std::string comparison_csv_header();
std::string comparison_csv_row(const std::string& manifold_id, double r, const GeodesicTriangle& t,
                               const ComparisonReport& rep);

}  // namespace riccilab
