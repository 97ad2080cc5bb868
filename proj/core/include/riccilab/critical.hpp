#pragma once

#include <string>
#include <vector>

#include "riccilab/geodesic.hpp"

namespace riccilab {

/// Criticality of q for the distance function d(p, .).
struct CriticalityReport {
  Vec p;
  Vec q;
  /// Unit initial directions (orthonormal coordinates at q) of the
  /// near-minimal geodesics q -> p.
  std::vector<Vec> directions;
  /// min over unit w of max_i <w, u_i>: positive when the origin is interior
  /// to the convex hull of the directions, minus its distance to the hull
  /// when outside.
  double hull_margin = 0.0;
  bool is_critical = false;
};

/// Signed margin of the origin with respect to conv(u_i), computed exactly by
/// enumerating faces of the hull (n <= 4, a few dozen points).
double hull_margin(const std::vector<Vec>& directions);

CriticalityReport is_critical(const Manifold& m, const Vec& p, const Vec& q, double tol_extra = 1e-3,
                              double tol_crit = 1e-3, const GeodesicOptions& opts = {});

/// Threshold (1 + sin(pi/36)) / (1 - sin(pi/36)) below which the angle bound
/// is undefined.
double cpe_threshold();

/// (18/19) acos(sin(pi/36) + (1 + sin(pi/36)) / nu).
double cpe_angle_lower_bound(double nu);

struct CpeReport {
  bool vacuous = false;  ///< q1 is not critical, so there is nothing to check
  bool pass = false;
  double theta = 0.0;    ///< smallest angle between geodesics p -> q1 and p -> q2
  double bound = 0.0;
  double ratio = 0.0;    ///< d(p, q2) / d(p, q1)
  CriticalityReport criticality;
};

/// Raises precondition_violated when d(p, q2) < nu d(p, q1).
CpeReport verify_cpe(const Manifold& m, const Vec& p, const Vec& q1, const Vec& q2, double nu, double mu_slack,
                     const GeodesicOptions& opts = {});

/// vol(S^{n-1}) / vol(cap of angular radius theta/2 in S^{n-1}).
double packing_count(int n, double theta);

/// integral_0^r sin^k(t) dt by the standard reduction formula.
double sin_power_integral(int k, double r);

std::string criticality_csv_header();
std::string criticality_csv_row(const std::string& manifold_id, const CriticalityReport& rep);

}  // namespace riccilab
