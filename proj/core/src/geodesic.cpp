#include "riccilab/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "geodesic_detail.hpp"
#include "riccilab/error.hpp"
#include "riccilab/ode.hpp"
#include "riccilab/rng.hpp"

namespace riccilab {

namespace {

using detail::Connection;

Vec unit_velocity(const Manifold& m, const Vec& p, const Vec& v) {
  const double len = m.norm(p, v);
  if (!(len > 0.0) || !std::isfinite(len)) fail(ErrorCode::invalid_argument, "initial velocity must be nonzero");
  return v / len;
}

// Geodesic equation x'' = -Gamma(x')(x'), state (x, v).
struct GeodesicRhs {
  const Manifold& m;
  int n;
  void operator()(double, const OdeState& y, OdeState& dy) const {
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    dy.resize(2 * n);
    dy.head(n) = v;
    if (m.is_conformally_flat()) {
      // Gamma(v, v) = 2 (df.v) v - |v|^2 grad f for g = e^{2f} I
      Vec df;
      m.conformal_log_factor(x, &df, nullptr);
      dy.segment(n, n) = v.squaredNorm() * df - 2.0 * df.dot(v) * v;
      return;
    }
    const Christoffel gam = m.christoffel_at(x);
    dy.segment(n, n) = -gam.contract(v, v);
  }
};

// Geodesic equation plus its variation with respect to the initial velocity:
// state (x, v, X, V) with X = dx/dw, V = dv/dw.
struct VariationalRhs {
  const Manifold& m;
  int n;
  void operator()(double, const OdeState& y, OdeState& dy) const {
    if (m.is_conformally_flat()) return conformal(y, dy);
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    const Christoffel gam = m.christoffel_at(x);
    const ChristoffelDerivative dgam = m.christoffel_derivative_at(x);
    Mat A = Mat::Zero(n, n);  // A(k, l) = d_l Gamma^k_ij v^i v^j
    Mat B = Mat::Zero(n, n);  // B(k, j) = 2 Gamma^k_ij v^i
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          B(k, j) += 2.0 * gam(k, i, j) * v[i];
          for (int l = 0; l < n; ++l) A(k, l) += dgam(l, k, i, j) * v[i] * v[j];
        }
    dy.resize(2 * n + 2 * n * n);
    dy.head(n) = v;
    dy.segment(n, n) = -gam.contract(v, v);
    for (int c = 0; c < n; ++c) {
      const Vec X = y.segment(2 * n + c * n, n);
      const Vec V = y.segment(2 * n + n * n + c * n, n);
      dy.segment(2 * n + c * n, n) = V;
      dy.segment(2 * n + n * n + c * n, n) = -A * X - B * V;
    }
  }

  // Same system for g = e^{2f} I, where the acceleration is
  // |v|^2 grad f - 2 (grad f . v) v and its variations need only the Hessian.
  void conformal(const OdeState& y, OdeState& dy) const {
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    Vec df;
    Mat H;
    m.conformal_log_factor(x, &df, &H);
    const double vv = v.squaredNorm();
    const double dfv = df.dot(v);
    dy.resize(2 * n + 2 * n * n);
    dy.head(n) = v;
    dy.segment(n, n) = vv * df - 2.0 * dfv * v;
    for (int c = 0; c < n; ++c) {
      const Vec X = y.segment(2 * n + c * n, n);
      const Vec V = y.segment(2 * n + n * n + c * n, n);
      const Vec HX = H * X;
      dy.segment(2 * n + c * n, n) = V;
      dy.segment(2 * n + n * n + c * n, n) =
          vv * HX - 2.0 * HX.dot(v) * v + 2.0 * v.dot(V) * df - 2.0 * df.dot(V) * v - 2.0 * dfv * V;
    }
  }
};

struct Shot {
  bool ok = false;
  Vec end;
  Vec end_velocity;
  Mat jacobian;
};

// Integrates the time-1 geodesic with initial velocity w and the Jacobian of
// the endpoint with respect to w.
Shot shoot(const Manifold& m, const Vec& p, const Vec& w) {
  const int n = m.dim();
  OdeState y(2 * n + 2 * n * n);
  y.setZero();
  y.head(n) = p;
  y.segment(n, n) = w;
  for (int c = 0; c < n; ++c) y[2 * n + n * n + c * n + c] = 1.0;
  Dopri5Options opt;
  opt.h_init = 0.1;
  opt.h_max = 0.25;
  opt.max_steps = 20000;
  bool inside = true;
  Shot out;
  try {
    dopri5(VariationalRhs{m, n}, y, 0.0, 1.0, opt, [&](double, const OdeState& s) {
      inside = m.in_domain(s.head(n));
      return inside;
    });
  } catch (const Error&) {
    return out;
  }
  if (!inside || !y.allFinite()) return out;
  out.ok = true;
  out.end = y.head(n);
  out.end_velocity = y.segment(n, n);
  out.jacobian.resize(n, n);
  for (int c = 0; c < n; ++c) out.jacobian.col(c) = y.segment(2 * n + c * n, n);
  return out;
}

struct Solved {
  bool ok = false;
  Vec w;
  Shot shot;
};

// Levenberg-Marquardt on the g(q)-weighted endpoint miss.
Solved solve_shooting(const Manifold& m, const Vec& p, const Vec& q, const Vec& w0, const Mat& gp, const Mat& Lq,
                      int max_iterations) {
  const int n = m.dim();
  Solved s;
  s.w = w0;
  s.shot = shoot(m, p, s.w);
  if (!s.shot.ok) return s;
  Vec r = Lq.transpose() * m.chart_delta(q, s.shot.end);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  const double cap = 10.0 * (std::sqrt(w0.dot(gp * w0)) + 1.0);
  for (int it = 0; it <= max_iterations; ++it) {
    const double len = std::sqrt(s.w.dot(gp * s.w));
    if (std::sqrt(cost) <= 1e-9 * std::max(1.0, len)) {
      s.ok = true;
      return s;
    }
    if (it == max_iterations) break;
    const Mat Jr = Lq.transpose() * s.shot.jacobian;
    const Mat A = Jr.transpose() * Jr;
    const Vec grad = Jr.transpose() * r;
    bool improved = false;
    while (lambda < 1e10) {
      Mat H = A;
      for (int i = 0; i < n; ++i) H(i, i) += lambda * A(i, i) + 1e-14;
      const Vec step = -H.ldlt().solve(grad);
      const Vec w_try = s.w + step;
      if (std::sqrt(w_try.dot(gp * w_try)) > cap) {
        lambda *= 4.0;
        continue;
      }
      Shot trial = shoot(m, p, w_try);
      if (trial.ok) {
        const Vec r_try = Lq.transpose() * m.chart_delta(q, trial.end);
        const double c_try = r_try.squaredNorm();
        if (c_try < cost) {
          s.w = w_try;
          s.shot = std::move(trial);
          r = r_try;
          cost = c_try;
          lambda = std::max(lambda / 3.0, 1e-12);
          improved = true;
          break;
        }
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }
  // Stagnated: accept a miss at the looser level.
  const double len = std::sqrt(s.w.dot(gp * s.w));
  s.ok = std::sqrt(cost) <= 1e-7 * std::max(1.0, len);
  return s;
}

struct Candidate {
  double length;
  Vec w;          // time-1 initial velocity
  Vec direction;  // orthonormal coordinates of w / length
  Shot shot;
};

std::vector<Candidate> shooting_solutions(const Manifold& m, const Vec& p, const Vec& q, const GeodesicOptions& opts) {
  const int n = m.dim();
  const Mat gp = m.metric_at(p);
  const Mat Lp = gp.llt().matrixL();
  const Mat Lq = m.metric_at(q).llt().matrixL();
  const Vec straight = m.chart_delta(p, q);
  const double L0 = std::sqrt(straight.dot(gp * straight));

  std::vector<Vec> starts{straight};
  if (opts.multi_start) {
    const Mat E = m.orthonormal_frame(p);
    for (const Vec& d : spread_directions(n, 2 * n * n)) starts.push_back(E * d * L0);
  }
  std::vector<Candidate> found;
  for (const Vec& w0 : starts) {
    Solved s = solve_shooting(m, p, q, w0, gp, Lq, opts.max_iterations);
    if (!s.ok) continue;
    const double len = std::sqrt(s.w.dot(gp * s.w));
    if (!(len > 0.0)) continue;
    const Vec dir = Lp.transpose() * s.w / len;
    bool dup = false;
    for (const auto& c : found) {
      if ((c.direction - dir).norm() < 1e-6 && std::abs(c.length - len) <= 1e-6 * std::max(1.0, len)) {
        dup = true;
        break;
      }
    }
    if (!dup) found.push_back({len, s.w, dir, std::move(s.shot)});
  }
  std::sort(found.begin(), found.end(),
            [](const Candidate& a, const Candidate& b) { return detail::path_order(a.length, a.direction, b.length, b.direction); });
  return found;
}

GeodesicBackend resolve(const Manifold& m, GeodesicBackend b) {
  if (b == GeodesicBackend::automatic) {
    return detail::has_closed_form(m) ? GeodesicBackend::closed_form : GeodesicBackend::shooting;
  }
  if (b == GeodesicBackend::closed_form && !detail::has_closed_form(m)) {
    fail(ErrorCode::unsupported_manifold, fmt::format("no closed-form geodesics on {}", m.id()));
  }
  return b;
}

GeodesicPath closed_form_path(const Manifold& m, const Vec& p, const Vec& v, double length, bool with_samples) {
  GeodesicPath path;
  path.start = p;
  path.initial_velocity = v;
  path.length = length;
  Vec x, vel;
  if (with_samples) {
    constexpr int kSegments = 32;
    path.samples.reserve(kSegments + 1);
    for (int i = 0; i <= kSegments; ++i) {
      const double t = length * i / kSegments;
      detail::closed_form_flow(m, p, v, t, x, vel);
      path.samples.push_back({t, x, vel});
    }
  } else {
    detail::closed_form_flow(m, p, v, length, x, vel);
  }
  if (with_samples) {
    path.end_point = path.samples.back().point;
    path.end_velocity = path.samples.back().velocity;
  } else {
    path.end_point = x;
    path.end_velocity = vel;
  }
  return path;
}

bool same_point(const Manifold& m, const Vec& p, const Vec& q) { return m.chart_delta(p, q).norm() <= 1e-15; }

}  // namespace

std::vector<Vec> spread_directions(int n, int count) {
  std::vector<Vec> out;
  out.reserve(count);
  if (n == 2) {
    for (int k = 0; k < count; ++k) {
      const double a = (k + 0.5) * 2.0 * std::numbers::pi / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
  } else if (n == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      const double z = 1.0 - (2.0 * k + 1.0) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double a = golden * k;
      out.push_back(make_vec({r * std::cos(a), r * std::sin(a), z}));
    }
  } else {
    Rng rng(split_seed(0x5eedULL, static_cast<std::uint64_t>(n)));
    for (int k = 0; k < count; ++k) out.push_back(rng.unit_vector(n));
  }
  return out;
}

GeodesicPath integrate_geodesic(const Manifold& m, const Vec& p, const Vec& v, double T, double step) {
  m.check_point(p);
  if (!(T > 0.0) || !std::isfinite(T)) fail(ErrorCode::invalid_argument, "integration length must be positive");
  if (!(step > 0.0)) fail(ErrorCode::invalid_argument, "step must be positive");
  const int n = m.dim();
  const Vec u = unit_velocity(m, p, v);

  GeodesicPath path;
  path.start = p;
  path.initial_velocity = u;
  path.samples.push_back({0.0, m.normalize(p), u});

  OdeState y(2 * n);
  y.head(n) = p;
  y.segment(n, n) = u;
  Dopri5Options opt;
  opt.h_init = std::min(step, T);
  opt.h_max = step;
  double last_t = 0.0;
  OdeState last = y;
  auto observer = [&](double t, const OdeState& s) {
    if (!m.in_domain(s.head(n))) return false;
    last_t = t;
    last = s;
    path.samples.push_back({t, m.normalize(s.head(n)), s.segment(n, n)});
    return true;
  };
  try {
    dopri5(GeodesicRhs{m, n}, y, 0.0, T, opt, observer);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::step_size_underflow) throw;
    path.truncated = true;
    path.diagnostic = e.what();
  }
  if (last_t < T) {
    path.truncated = true;
    if (path.diagnostic.empty()) {
      path.diagnostic = fmt::format("left-chart-domain: geodesic left the chart at t = {:.6g} of {:.6g}", last_t, T);
    }
  }
  path.length = last_t;
  path.end_point = m.normalize(last.head(n));
  path.end_velocity = last.segment(n, n);
  return path;
}

Vec exp_map(const Manifold& m, const Vec& p, const Vec& w, const GeodesicOptions& opts) {
  m.check_point(p);
  const double len = m.norm(p, w);
  if (len == 0.0) return m.normalize(p);
  if (resolve(m, opts.backend) == GeodesicBackend::closed_form) {
    Vec x, vel;
    detail::closed_form_flow(m, p, w / len, len, x, vel);
    return m.normalize(x);
  }
  GeodesicPath path = integrate_geodesic(m, p, w, len, opts.step);
  if (path.truncated) fail(ErrorCode::left_chart_domain, path.diagnostic);
  return path.end_point;
}

std::vector<GeodesicPath> minimal_geodesics(const Manifold& m, const Vec& p, const Vec& q, double tol_extra,
                                            const GeodesicOptions& opts) {
  m.check_point(p);
  m.check_point(q);
  if (!(tol_extra >= 0.0)) fail(ErrorCode::invalid_argument, "tol_extra must be >= 0");
  if (same_point(m, p, q)) return {};
  std::vector<GeodesicPath> out;

  if (resolve(m, opts.backend) == GeodesicBackend::closed_form) {
    const auto conns = detail::closed_form_connections(m, p, q, tol_extra);
    std::vector<std::pair<Connection, Vec>> keyed;
    for (const auto& c : conns) keyed.emplace_back(c, detail::to_orthonormal(m, p, c.direction));
    std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
      return detail::path_order(a.first.length, a.second, b.first.length, b.second);
    });
    const double best = m.model_distance(p, q);
    for (const auto& [c, key] : keyed) {
      GeodesicPath path = closed_form_path(m, p, c.direction, c.length, opts.with_samples);
      path.minimal_tolerance = opts.minimal_tolerance;
      path.is_minimal = c.length <= (1.0 + opts.minimal_tolerance) * best + 1e-12;
      out.push_back(std::move(path));
    }
    return out;
  }

  const auto found = shooting_solutions(m, p, q, opts);
  if (found.empty()) {
    fail(ErrorCode::no_solution_found,
         fmt::format("shooting found no geodesic between {} and {} on {}", fmt::join(p, ","), fmt::join(q, ","), m.id()));
  }
  const double shortest = found.front().length;
  const double best = m.has_model_distance() ? m.model_distance(p, q) : shortest;
  const double keep = (1.0 + tol_extra) * shortest + 1e-9 * std::max(1.0, shortest);
  for (const auto& c : found) {
    if (c.length > keep) continue;
    const Vec v = c.w / c.length;
    GeodesicPath path;
    if (opts.with_samples) {
      path = integrate_geodesic(m, p, v, c.length, opts.step);
      if (path.truncated) continue;
    } else {
      path.start = p;
      path.initial_velocity = v;
      path.length = c.length;
      path.end_point = m.normalize(c.shot.end);
      path.end_velocity = c.shot.end_velocity / c.length;
    }
    path.length = c.length;
    path.minimal_tolerance = opts.minimal_tolerance;
    path.is_minimal = c.length <= (1.0 + opts.minimal_tolerance) * best;
    out.push_back(std::move(path));
  }
  if (out.empty()) fail(ErrorCode::no_solution_found, "no converged geodesic survived re-integration");
  return out;
}

DistanceResult geodesic_distance(const Manifold& m, const Vec& p, const Vec& q, const GeodesicOptions& opts) {
  m.check_point(p);
  m.check_point(q);
  if (same_point(m, p, q)) return {0.0, Vec::Zero(m.dim())};
  if (resolve(m, opts.backend) == GeodesicBackend::closed_form) {
    const auto conns = detail::closed_form_connections(m, p, q, 0.0);
    return {conns.front().length, conns.front().direction};
  }
  const auto found = shooting_solutions(m, p, q, opts);
  if (found.empty()) fail(ErrorCode::no_solution_found, fmt::format("shooting found no geodesic on {}", m.id()));
  return {found.front().length, found.front().w / found.front().length};
}

double distance(const Manifold& m, const Vec& p, const Vec& q, const GeodesicOptions& opts) {
  if (m.has_model_distance() && opts.backend != GeodesicBackend::shooting) return m.model_distance(p, q);
  return geodesic_distance(m, p, q, opts).length;
}

}  // namespace riccilab
