#include "riccilab/comparison.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "riccilab/error.hpp"
#include "riccilab/rng.hpp"

namespace riccilab {

namespace {

constexpr double kDegenerateSide = 1e-6;

double clamped_acos(double c) {
  if (c > 1.0 + 1e-12 || c < -1.0 - 1e-12 || std::isnan(c)) {
    fail(ErrorCode::triangle_inequality_violation, fmt::format("cosine {} outside [-1, 1]", c));
  }
  return std::acos(std::clamp(c, -1.0, 1.0));
}

}  // namespace

double comparison_angle(double H, double l_prev, double l_next, double l_opp) {
  if (!(l_prev > 0.0 && l_next > 0.0 && l_opp > 0.0)) {
    fail(ErrorCode::invalid_argument, "comparison_angle: side lengths must be positive");
  }
  const double tol = 1e-12 * (l_prev + l_next + l_opp);
  if (l_opp > l_prev + l_next + tol || l_opp < std::abs(l_prev - l_next) - tol) {
    fail(ErrorCode::triangle_inequality_violation,
         fmt::format("sides ({}, {}, {}) violate the triangle inequality", l_prev, l_next, l_opp));
  }
  if (H == 0.0) {
    return clamped_acos((l_prev * l_prev + l_next * l_next - l_opp * l_opp) / (2.0 * l_prev * l_next));
  }
  if (H > 0.0) {
    const double k = std::sqrt(H);
    if (l_prev + l_next + l_opp >= 2.0 * std::numbers::pi / k) {
      fail(ErrorCode::perimeter_too_large, "perimeter must be below 2 pi / sqrt(H)");
    }
    const double a = k * l_prev, b = k * l_next, c = k * l_opp;
    return clamped_acos((std::cos(c) - std::cos(a) * std::cos(b)) / (std::sin(a) * std::sin(b)));
  }
  const double k = std::sqrt(-H);
  const double a = k * l_prev, b = k * l_next, c = k * l_opp;
  return clamped_acos((std::cosh(a) * std::cosh(b) - std::cosh(c)) / (std::sinh(a) * std::sinh(b)));
}

GeodesicTriangle measure_triangle(const Manifold& m, const Vec& p0, const Vec& p1, const Vec& p2,
                                  const GeodesicOptions& opts) {
  GeodesicTriangle t;
  t.vertices = {p0, p1, p2};
  for (int i = 0; i < 3; ++i) {
    const Vec& a = t.vertices[i];
    const Vec& b = t.vertices[(i + 1) % 3];
    if (m.chart_delta(a, b).norm() < 1e-8) {
      fail(ErrorCode::degenerate_vertex, fmt::format("vertices {} and {} coincide", i, (i + 1) % 3));
    }
    auto paths = minimal_geodesics(m, a, b, 0.0, opts);
    if (paths.front().length < 1e-8) fail(ErrorCode::degenerate_vertex, "side shorter than 1e-8");
    t.sides[i] = std::move(paths.front());
    t.lengths[i] = t.sides[i].length;
  }
  for (int i = 0; i < 3; ++i) {
    const GeodesicPath& incoming = t.sides[(i + 1) % 3];
    const GeodesicPath& outgoing = t.sides[(i + 2) % 3];
    const Vec& corner = t.vertices[(i + 2) % 3];
    t.angles[i] = m.angle(corner, -incoming.end_velocity, outgoing.initial_velocity);
  }
  return t;
}

ComparisonReport check_toponogov(const GeodesicTriangle& t, double mu) {
  if (!(mu > 0.0 && mu <= 1.0)) fail(ErrorCode::invalid_argument, "mu must lie in (0, 1]");
  ComparisonReport rep;
  rep.mu = mu;
  rep.pass = true;
  const auto& l = t.lengths;
  for (int i = 0; i < 3; ++i) {
    const double prev = l[(i + 2) % 3];
    const double next = l[(i + 1) % 3];
    rep.degenerate[i] = prev < kDegenerateSide || next < kDegenerateSide;
    if (rep.degenerate[i] || l[i] <= 0.0) {
      rep.comparison_angles[i] = std::numeric_limits<double>::quiet_NaN();
      rep.ratios[i] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    rep.comparison_angles[i] = comparison_angle(0.0, prev, next, l[i]);
    rep.ratios[i] = t.angles[i] / rep.comparison_angles[i];
    if (!(t.angles[i] > mu * rep.comparison_angles[i])) rep.pass = false;
  }
  return rep;
}

GeodesicTriangle random_triangle(const Manifold& m, const Vec& p, double r, std::uint64_t seed,
                                 const GeodesicOptions& opts) {
  if (!(r > 0.0) || !std::isfinite(r)) fail(ErrorCode::invalid_argument, "ball radius must be positive");
  m.check_point(p);
  const int n = m.dim();
  const Mat E = m.orthonormal_frame(p);
  constexpr int kRedraws = 200;
  constexpr int kSolverFailures = 20;
  Rng rng(seed);
  int failures = 0;
  for (int attempt = 0; attempt < kRedraws; ++attempt) {
    std::array<Vec, 3> v;
    for (auto& x : v) x = exp_map(m, p, E * (r * rng.in_unit_ball(n)), opts);
    try {
      const double d01 = distance(m, v[0], v[1], opts);
      const double d12 = distance(m, v[1], v[2], opts);
      const double d20 = distance(m, v[2], v[0], opts);
      if (std::min({d01, d12, d20}) < r / 20.0) continue;
      return measure_triangle(m, v[0], v[1], v[2], opts);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::no_solution_found && e.code() != ErrorCode::left_chart_domain) throw;
      if (++failures > kSolverFailures) {
        fail(ErrorCode::sampling_budget_exceeded, "geodesic solver failed repeatedly while sampling triangles");
      }
    }
  }
  fail(ErrorCode::sampling_budget_exceeded, "could not draw a non-degenerate triangle");
}

double estimate_rac(const Manifold& m, const Vec& p, double mu, double r_max, int n_triangles, std::uint64_t seed,
                    const RacOptions& opts) {
  if (!(mu > 0.0 && mu < 1.0)) fail(ErrorCode::invalid_argument, "mu must lie in (0, 1)");
  if (!(r_max > 0.0) || !std::isfinite(r_max)) fail(ErrorCode::invalid_argument, "r_max must be positive");
  if (n_triangles < 1) fail(ErrorCode::invalid_argument, "n_triangles must be >= 1");
  m.check_point(p);

  auto all_pass = [&](double r) {
    for (int k = 0; k < n_triangles; ++k) {
      const auto t = random_triangle(m, p, r, split_seed(seed, static_cast<std::uint64_t>(k)), opts.geodesic);
      if (!check_toponogov(t, mu).pass) return false;
    }
    return true;
  };

  if (all_pass(r_max)) return r_max;
  double lo = 0.0, hi = r_max;
  for (int i = 0; i < opts.bisection_steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (all_pass(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

std::string comparison_csv_header() {
  return "manifold,r,l0,l1,l2,alpha0,alpha1,alpha2,cmp0,cmp1,cmp2,mu,pass";
}

std::string comparison_csv_row(const std::string& manifold_id, double r, const GeodesicTriangle& t,
                               const ComparisonReport& rep) {
  return fmt::format("\"{}\",{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}",
                     manifold_id, r, t.lengths[0], t.lengths[1], t.lengths[2], t.angles[0], t.angles[1],
                     t.angles[2], rep.comparison_angles[0], rep.comparison_angles[1], rep.comparison_angles[2],
                     rep.mu, rep.pass ? 1 : 0);
}

}  // namespace riccilab
