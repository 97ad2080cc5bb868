#include "riccilab/critical.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "power_integrals.hpp"
#include "riccilab/error.hpp"

namespace riccilab {

namespace {

constexpr double kPi = std::numbers::pi;

// Visits every subset of {0..m-1} of size k.
template <typename F>
void for_each_subset(int m, int k, F&& f) {
  if (k > m || k <= 0) return;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    f(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == m - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

// Distance from the origin to conv(points).
double hull_distance(const std::vector<Vec>& pts, int n) {
  const int m = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= std::min(m, n + 1); ++k) {
    for_each_subset(m, k, [&](const std::vector<int>& s) {
      // Closest point of aff(s) to the origin: minimize |u0 + D c|.
      const Vec& u0 = pts[s[0]];
      if (k == 1) {
        best = std::min(best, u0.norm());
        return;
      }
      Eigen::MatrixXd D(n, k - 1);
      for (int j = 1; j < k; ++j) D.col(j - 1) = pts[s[j]] - u0;
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
      if (qr.rank() < k - 1) return;
      const Eigen::VectorXd c = qr.solve(Eigen::VectorXd(-u0));
      const double c0 = 1.0 - c.sum();
      if (c0 < -1e-12 || (c.array() < -1e-12).any()) return;
      best = std::min(best, (Eigen::VectorXd(u0) + D * c).norm());
    });
  }
  return best;
}

}  // namespace

double hull_margin(const std::vector<Vec>& directions) {
  if (directions.empty()) fail(ErrorCode::invalid_argument, "hull_margin of an empty set");
  const int n = static_cast<int>(directions.front().size());
  const int m = static_cast<int>(directions.size());
  const double dist = hull_distance(directions, n);
  if (dist > 1e-12) return -dist;

  // Origin in the hull: distance to the nearest facet hyperplane.
  double margin = std::numeric_limits<double>::infinity();
  bool any_facet = false;
  for_each_subset(m, n, [&](const std::vector<int>& s) {
    // Normal w orthogonal to the differences u_j - u_0.
    Eigen::MatrixXd D(n - 1, n);
    for (int j = 1; j < n; ++j) D.row(j - 1) = (directions[s[j]] - directions[s[0]]).transpose();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
    if (lu.rank() < n - 1) return;
    const Eigen::MatrixXd ker = lu.kernel();
    if (ker.cols() != 1) return;
    Eigen::VectorXd w = ker.col(0).normalized();
    double b = w.dot(directions[s[0]]);
    if (b < 0.0) {
      w = -w;
      b = -b;
    }
    for (const Vec& u : directions) {
      if (w.dot(u) > b + 1e-12) return;
    }
    any_facet = true;
    margin = std::min(margin, b);
  });
  return any_facet ? margin : 0.0;
}

CriticalityReport is_critical(const Manifold& m, const Vec& p, const Vec& q, double tol_extra, double tol_crit,
                              const GeodesicOptions& opts) {
  CriticalityReport rep;
  rep.p = p;
  rep.q = q;
  GeodesicOptions o = opts;
  o.with_samples = false;
  const auto paths = minimal_geodesics(m, q, p, tol_extra, o);
  if (paths.empty()) fail(ErrorCode::invalid_argument, "is_critical requires p != q");
  const Mat L = m.metric_at(q).llt().matrixL();
  for (const auto& g : paths) {
    Vec d = L.transpose() * g.initial_velocity;
    rep.directions.push_back(d / d.norm());
  }
  rep.hull_margin = hull_margin(rep.directions);
  rep.is_critical = rep.hull_margin >= -tol_crit;
  return rep;
}

double cpe_threshold() {
  const double s = std::sin(kPi / 36.0);
  return (1.0 + s) / (1.0 - s);
}

double cpe_angle_lower_bound(double nu) {
  if (!(nu >= cpe_threshold() * (1.0 - 1e-12))) {
    fail(ErrorCode::nu_below_threshold, fmt::format("nu = {} is below the threshold {:.12f}", nu, cpe_threshold()));
  }
  const double s = std::sin(kPi / 36.0);
  if (std::isinf(nu)) return 18.0 / 19.0 * std::acos(s);
  const double arg = s + (1.0 + s) / nu;
  return 18.0 / 19.0 * std::acos(std::min(arg, 1.0));
}

CpeReport verify_cpe(const Manifold& m, const Vec& p, const Vec& q1, const Vec& q2, double nu, double mu_slack,
                     const GeodesicOptions& opts) {
  CpeReport rep;
  rep.bound = cpe_angle_lower_bound(nu);
  rep.criticality = is_critical(m, p, q1, 1e-3, 1e-3, opts);
  if (!rep.criticality.is_critical) {
    rep.vacuous = true;
    rep.pass = true;
    return rep;
  }
  GeodesicOptions o = opts;
  o.with_samples = false;
  const auto g1 = minimal_geodesics(m, p, q1, 1e-3, o);
  const auto g2 = minimal_geodesics(m, p, q2, 1e-3, o);
  if (g2.empty()) fail(ErrorCode::precondition_violated, "q2 coincides with p");
  const double d1 = g1.front().length;
  const double d2 = g2.front().length;
  rep.ratio = d2 / d1;
  if (d2 < nu * d1) {
    fail(ErrorCode::precondition_violated,
         fmt::format("d(p,q2) = {:.6g} is below nu * d(p,q1) = {:.6g}", d2, nu * d1));
  }
  rep.theta = std::numeric_limits<double>::infinity();
  for (const auto& a : g1)
    for (const auto& b : g2) rep.theta = std::min(rep.theta, m.angle(p, a.initial_velocity, b.initial_velocity));
  rep.pass = rep.theta >= rep.bound - mu_slack;
  return rep;
}

double sin_power_integral(int k, double r) {
  if (k < 0) fail(ErrorCode::invalid_argument, "sin power must be >= 0");
  return detail::power_integral(k, r, false);
}

double packing_count(int n, double theta) {
  if (n < 2) fail(ErrorCode::invalid_argument, "packing_count needs n >= 2");
  if (!(theta > 0.0 && theta <= kPi)) fail(ErrorCode::invalid_theta, fmt::format("theta = {} outside (0, pi]", theta));
  if (n == 2) return 2.0 * kPi / theta;
  return sin_power_integral(n - 2, kPi) / sin_power_integral(n - 2, 0.5 * theta);
}

std::string criticality_csv_header() { return "manifold,p,q,n_directions,hull_margin,is_critical"; }

std::string criticality_csv_row(const std::string& manifold_id, const CriticalityReport& rep) {
  return fmt::format("\"{}\",\"{:.17g}\",\"{:.17g}\",{},{:.17g},{}", manifold_id, fmt::join(rep.p, " "),
                     fmt::join(rep.q, " "), rep.directions.size(), rep.hull_margin, rep.is_critical ? 1 : 0);
}

}  // namespace riccilab
