#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riccilab/manifold.hpp"
#include "riccilab/types.hpp"

namespace riccilab {

struct GeodesicSample {
  double t = 0.0;
  Vec point;
  Vec velocity;
};

/// Unit-speed geodesic. Sample points are stored in normalized chart
/// coordinates; velocities are chart components.
struct GeodesicPath {
  Vec start;
  Vec initial_velocity;
  double length = 0.0;
  std::vector<GeodesicSample> samples;
  Vec end_point;
  Vec end_velocity;
  bool is_minimal = false;
  double minimal_tolerance = 1e-3;
  /// Set when integration stopped early (left the chart domain).
  bool truncated = false;
  std::string diagnostic;
};

struct ConjugateReport {
  GeodesicPath geodesic;
  std::optional<double> first_conjugate_time;
  double horizon = 0.0;
};

enum class GeodesicBackend {
  automatic,    ///< closed form on space forms, shooting elsewhere
  closed_form,  ///< space forms only
  shooting,     ///< ODE shooting everywhere
};

struct GeodesicOptions {
  GeodesicBackend backend = GeodesicBackend::automatic;
  /// Shooting: 2n^2 spread directions plus the chart straight line. When off
  /// only the straight-line start is tried (fast, for short distances).
  bool multi_start = true;
  bool with_samples = true;
  /// Largest step of the adaptive integrator when sampling paths.
  double step = 0.05;
  int max_iterations = 40;
  /// Relative slack for the is_minimal certificate.
  double minimal_tolerance = 1e-3;
};

/// Integrates the geodesic equation from p with initial direction v
/// (normalized to unit speed) for arc length T. On leaving the chart domain
/// the path is truncated and `truncated`/`diagnostic` are set.
GeodesicPath integrate_geodesic(const Manifold& m, const Vec& p, const Vec& v, double T, double step = 0.01);

/// exp_p(w): closed form on space forms, integration otherwise.
Vec exp_map(const Manifold& m, const Vec& p, const Vec& w, const GeodesicOptions& opts = {});

/// All geodesics from p to q with length <= (1 + tol_extra) * shortest found.
/// Sorted by length, then lexicographically by direction in an orthonormal
/// frame at p. Empty when p == q. Raises no_solution_found when nothing
/// converges.
std::vector<GeodesicPath> minimal_geodesics(const Manifold& m, const Vec& p, const Vec& q, double tol_extra,
                                            const GeodesicOptions& opts = {});

struct DistanceResult {
  double length = 0.0;
  /// Unit initial velocity (chart components) of a shortest geodesic p -> q.
  Vec direction;
};

/// Length and direction of a shortest geodesic; cheaper than
/// minimal_geodesics because no paths or samples are materialized.
DistanceResult geodesic_distance(const Manifold& m, const Vec& p, const Vec& q, const GeodesicOptions& opts = {});

/// Shortest length only.
double distance(const Manifold& m, const Vec& p, const Vec& q, const GeodesicOptions& opts = {});

/// First t <= horizon at which a normal Jacobi field with J(0) = 0 vanishes
/// again along the geodesic from p in direction v. Raises left_chart_domain
/// when the geodesic approaches a chart singularity before the horizon.
ConjugateReport first_conjugate_time(const Manifold& m, const Vec& p, const Vec& v, double horizon,
                                     double step = 2e-3);

/// Minimum first conjugate time over seeded random unit directions at random
/// points. Returns +infinity when no conjugate point is found.
double estimate_conjugate_radius(const Manifold& m, int n_samples, double horizon, std::uint64_t seed,
                                 double step = 2e-3);

/// 2n^2 well-spread unit vectors in R^n (n = 2: equally spaced angles,
/// n = 3: Fibonacci sphere, n = 4: fixed pseudo-random set).
std::vector<Vec> spread_directions(int n, int count);

}  // namespace riccilab
