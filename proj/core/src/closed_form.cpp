#include <cmath>
#include <numbers>

#include "geodesic_detail.hpp"
#include "riccilab/error.hpp"

namespace riccilab::detail {

namespace {

using Ambient = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>;

// Poincare ball <-> hyperboloid (curvature -1).
Ambient to_hyperboloid(const Vec& x) {
  const int n = static_cast<int>(x.size());
  const double s = 1.0 - x.squaredNorm();
  Ambient y(n + 1);
  y[0] = (2.0 - s) / s;
  y.tail(n) = 2.0 * x / s;
  return y;
}

Ambient hyperboloid_push(const Vec& x, const Vec& w) {
  // d/dt of to_hyperboloid(x + t w) at t = 0.
  const int n = static_cast<int>(x.size());
  const double s = 1.0 - x.squaredNorm();
  const double xw = x.dot(w);
  Ambient t(n + 1);
  t[0] = 4.0 * xw / (s * s);
  t.tail(n) = 2.0 * w / s + 4.0 * xw * x / (s * s);
  return t;
}

double minkowski(const Ambient& a, const Ambient& b) {
  const auto n = a.size() - 1;
  return -a[0] * b[0] + a.tail(n).dot(b.tail(n));
}

void from_hyperboloid(const Ambient& y, const Ambient& dy, Vec& x, Vec& dx) {
  const auto n = y.size() - 1;
  const double d = 1.0 + y[0];
  x = y.tail(n) / d;
  dx = (dy.tail(n) * d - y.tail(n) * dy[0]) / (d * d);
}

// Chart velocity of an ambient tangent vector on the unit sphere.
Vec sphere_pull(const Manifold& m, const Vec& p, const Ambient& t) {
  const auto J = m.sphere_jacobian(p);
  const Mat gu = J.transpose() * J;
  return gu.ldlt().solve(J.transpose() * t);
}

}  // namespace

bool has_closed_form(const Manifold& m) { return m.is_space_form(); }

Vec to_orthonormal(const Manifold& m, const Vec& p, const Vec& w) {
  const Mat L = m.metric_at(p).llt().matrixL();
  return L.transpose() * w;
}

bool path_order(double la, const Vec& da, double lb, const Vec& db) {
  const double scale = std::max({1.0, la, lb});
  if (std::abs(la - lb) > 1e-9 * scale) return la < lb;
  for (Eigen::Index i = 0; i < da.size(); ++i) {
    if (std::abs(da[i] - db[i]) > 1e-12) return da[i] < db[i];
  }
  return false;
}

std::vector<Connection> closed_form_connections(const Manifold& m, const Vec& p, const Vec& q, double tol_extra) {
  m.check_point(p);
  m.check_point(q);
  const double c = m.scale();
  std::vector<Connection> out;
  switch (m.kind()) {
    case ManifoldKind::euclidean: {
      const Vec d = q - p;
      const double len = d.norm();
      out.push_back({c * len, d / (c * len)});
      break;
    }
    case ManifoldKind::flat_torus: {
      for (const auto& t : m.lattice()->closest_translates(q - p, tol_extra)) {
        const Vec d = (q - p) - t.vector;
        const double len = d.norm();
        out.push_back({c * len, d / (c * len)});
      }
      break;
    }
    case ManifoldKind::sphere: {
      const double rho = m.sphere_radius();
      const Ambient a = m.sphere_embed(p);
      const Ambient b = m.sphere_embed(q);
      const double theta = 2.0 * std::atan2((a - b).norm(), (a + b).norm());
      if (theta > std::numbers::pi - 1e-9) {
        // Antipodal: every direction is minimal; report a spread sample.
        const Mat E = m.orthonormal_frame(p);
        const int n = m.dim();
        for (const Vec& d : spread_directions(n, 2 * n * n)) out.push_back({rho * std::numbers::pi, E * d});
        break;
      }
      const Ambient diff = b - a;
      Ambient v = diff - diff.dot(a) * a;
      v /= v.norm();
      out.push_back({rho * theta, sphere_pull(m, p, v) / rho});
      break;
    }
    case ManifoldKind::hyperbolic: {
      const double rho = c / std::sqrt(-m.curvature_param());
      const Ambient P = to_hyperboloid(p);
      const Ambient Q = to_hyperboloid(q);
      const double s = std::sqrt((1.0 - p.squaredNorm()) * (1.0 - q.squaredNorm()));
      const double du = 2.0 * std::asinh((q - p).norm() / s);
      const double sh = std::sinh(0.5 * du);
      Ambient U = (Q - P) - 2.0 * sh * sh * P;
      U /= std::sqrt(std::max(minkowski(U, U), 1e-300));
      Vec x, dx;
      from_hyperboloid(P, U, x, dx);
      out.push_back({rho * du, dx / rho});
      break;
    }
    default: fail(ErrorCode::unsupported_manifold, "no closed-form geodesics on this manifold");
  }
  return out;
}

void closed_form_flow(const Manifold& m, const Vec& p, const Vec& v, double t, Vec& x, Vec& vel) {
  switch (m.kind()) {
    case ManifoldKind::euclidean:
      x = p + t * v;
      vel = v;
      return;
    case ManifoldKind::flat_torus:
      x = m.normalize(p + t * v);
      vel = v;
      return;
    case ManifoldKind::sphere: {
      const Ambient a = m.sphere_embed(p);
      const auto J = m.sphere_jacobian(p);
      const Ambient T = J * v;
      const double omega = T.norm();
      if (omega == 0.0) {
        x = p;
        vel = v;
        return;
      }
      const Ambient tn = T / omega;
      const double ang = omega * t;
      const Ambient u = a * std::cos(ang) + tn * std::sin(ang);
      const Ambient du = omega * (-a * std::sin(ang) + tn * std::cos(ang));
      x = m.sphere_chart(u / u.norm());
      vel = sphere_pull(m, x, du);
      return;
    }
    case ManifoldKind::hyperbolic: {
      const Ambient P = to_hyperboloid(p);
      const Ambient T = hyperboloid_push(p, v);
      const double omega = std::sqrt(std::max(minkowski(T, T), 0.0));
      if (omega == 0.0) {
        x = p;
        vel = v;
        return;
      }
      const Ambient tn = T / omega;
      const double s = omega * t;
      const Ambient y = P * std::cosh(s) + tn * std::sinh(s);
      const Ambient dy = omega * (P * std::sinh(s) + tn * std::cosh(s));
      from_hyperboloid(y, dy, x, vel);
      return;
    }
    default: fail(ErrorCode::unsupported_manifold, "no closed-form geodesics on this manifold");
  }
}

}  // namespace riccilab::detail
