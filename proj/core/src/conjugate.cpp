#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "riccilab/error.hpp"
#include "riccilab/geodesic.hpp"
#include "riccilab/ode.hpp"
#include "riccilab/rng.hpp"

namespace riccilab {

namespace {

// Margin kept from chart singularities while propagating Jacobi fields.
constexpr double kPoleMargin = 0.05;

bool has_pole_band(const Manifold& m) {
  return m.kind() == ManifoldKind::sphere || m.kind() == ManifoldKind::ellipsoid ||
         m.kind() == ManifoldKind::surface_of_revolution;
}

// State: x, v, parallel normal frame E (n x k), Jacobi propagator Y and Y'
// (k x k, in the frame E), k = n - 1.
struct JacobiRhs {
  const Manifold& m;
  int n;
  int k;
  void operator()(double, const OdeState& y, OdeState& dy) const {
    const Vec x = y.head(n);
    const Vec v = y.segment(n, n);
    const Christoffel gam = m.christoffel_at(x);
    const Curvature R = m.curvature_at(x);
    const Mat g = m.metric_at(x);
    dy.resize(y.size());
    dy.head(n) = v;
    dy.segment(n, n) = -gam.contract(v, v);
    const int e0 = 2 * n;
    const int y0 = e0 + n * k;
    const int yp0 = y0 + k * k;
    Mat E(n, k);
    for (int a = 0; a < k; ++a) {
      E.col(a) = y.segment(e0 + a * n, n);
      dy.segment(e0 + a * n, n) = -gam.contract(v, E.col(a));
    }
    // A_ab = g(R(E_a, v) v, E_b)
    Mat A(k, k);
    for (int a = 0; a < k; ++a) {
      const Vec rv = R.apply(E.col(a), v, v);
      for (int b = 0; b < k; ++b) A(a, b) = rv.dot(g * E.col(b));
    }
    for (int c = 0; c < k; ++c) {
      Vec Ycol(k), Ypcol(k);
      for (int a = 0; a < k; ++a) {
        Ycol[a] = y[y0 + c * k + a];
        Ypcol[a] = y[yp0 + c * k + a];
      }
      const Vec acc = -A * Ycol;
      for (int a = 0; a < k; ++a) {
        dy[y0 + c * k + a] = Ypcol[a];
        dy[yp0 + c * k + a] = acc[a];
      }
    }
  }
};

struct JacobiSnapshot {
  double det = 0.0;
  double sigma = 0.0;
  double yp_norm = 0.0;
};

JacobiSnapshot snapshot(const OdeState& y, int n, int k) {
  const int y0 = 2 * n + n * k;
  Mat Y(k, k), Yp(k, k);
  for (int c = 0; c < k; ++c)
    for (int a = 0; a < k; ++a) {
      Y(a, c) = y[y0 + c * k + a];
      Yp(a, c) = y[y0 + k * k + c * k + a];
    }
  JacobiSnapshot s;
  s.det = Y.determinant();
  Eigen::JacobiSVD<Mat> svd(Y);
  s.sigma = svd.singularValues()(k - 1);
  s.yp_norm = Yp.norm();
  return s;
}

}  // namespace

ConjugateReport first_conjugate_time(const Manifold& m, const Vec& p, const Vec& v, double horizon, double step) {
  m.check_point(p);
  if (!(horizon > 0.0) || !std::isfinite(horizon)) fail(ErrorCode::invalid_argument, "horizon must be positive");
  if (!(step > 0.0)) fail(ErrorCode::invalid_argument, "step must be positive");
  const int n = m.dim();
  const int k = n - 1;
  const Mat g = m.metric_at(p);
  const double speed = std::sqrt(v.dot(g * v));
  if (!(speed > 0.0)) fail(ErrorCode::invalid_argument, "direction must be nonzero");
  const Vec u = v / speed;

  // Orthonormal complement of u: QR of [u | I] in orthonormal coordinates
  // keeps +-u as the first column.
  const Mat L = g.llt().matrixL();
  Eigen::MatrixXd full(n, n + 1);
  full.col(0) = L.transpose() * u;
  full.rightCols(n) = Eigen::MatrixXd::Identity(n, n);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(full);
  const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Mat Linv_t = L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));

  const int e0 = 2 * n;
  const int y0 = e0 + n * k;
  const int yp0 = y0 + k * k;
  OdeState y(yp0 + k * k);
  y.setZero();
  y.head(n) = p;
  y.segment(n, n) = u;
  for (int a = 0; a < k; ++a) {
    const Vec ea = Q.col(a + 1);
    y.segment(e0 + a * n, n) = Linv_t * ea;
    y[yp0 + a * k + a] = 1.0;
  }

  ConjugateReport report;
  report.horizon = horizon;
  report.geodesic.start = p;
  report.geodesic.initial_velocity = u;
  report.geodesic.length = horizon;

  const JacobiRhs rhs{m, n, k};
  const int steps = static_cast<int>(std::ceil(horizon / step));
  const double h = horizon / steps;
  const bool band = has_pole_band(m);
  auto check_domain = [&](const OdeState& s, double t) {
    const Vec x = s.head(n);
    const bool ok = band ? m.in_domain(x, kPoleMargin) : m.in_domain(x);
    if (!ok) {
      fail(ErrorCode::left_chart_domain,
           fmt::format("geodesic reached a chart singularity at t = {:.4g} before the horizon", t));
    }
  };
  auto advance = [&](OdeState s, double t0, double dt) {
    rk4_step(rhs, s, t0, dt);
    return s;
  };
  auto finish = [&](double t, const OdeState& s) {
    report.first_conjugate_time = t;
    report.geodesic.length = t;
    report.geodesic.end_point = m.normalize(s.head(n));
    report.geodesic.end_velocity = s.segment(n, n);
    return report;
  };

  OdeState prev2 = y, prev = y;
  JacobiSnapshot s_prev2, s_prev = snapshot(y, n, k);
  double t = 0.0;
  for (int i = 1; i <= steps; ++i) {
    OdeState cur = advance(prev, t, h);
    const double tc = i * h;
    check_domain(cur, tc);
    const JacobiSnapshot s_cur = snapshot(cur, n, k);

    // Simple zero: det Y changes sign.
    if (i > 1 && s_prev.det * s_cur.det < 0.0) {
      double lo = t, hi = tc;
      OdeState state_lo = prev;
      double det_lo = s_prev.det;
      while (hi - lo > 1e-3) {
        const double mid = 0.5 * (lo + hi);
        const OdeState sm = advance(state_lo, lo, mid - lo);
        const double dm = snapshot(sm, n, k).det;
        if (dm * det_lo <= 0.0) {
          hi = mid;
        } else {
          lo = mid;
          state_lo = sm;
          det_lo = dm;
        }
      }
      return finish(0.5 * (lo + hi), state_lo);
    }
    // Zero of even multiplicity: local minimum of sigma_min that is
    // indistinguishable from zero at this step size.
    if (i > 2 && s_prev.sigma < s_prev2.sigma && s_prev.sigma <= s_cur.sigma &&
        s_prev.sigma <= 2.0 * h * s_prev.yp_norm) {
      const double t_base = t - h;
      double a = t_base, b = tc;
      const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
      auto sigma_at = [&](double tt) { return snapshot(advance(prev2, t_base, tt - t_base), n, k).sigma; };
      double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
      double f1 = sigma_at(x1), f2 = sigma_at(x2);
      while (b - a > 1e-3) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - phi * (b - a);
          f1 = sigma_at(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + phi * (b - a);
          f2 = sigma_at(x2);
        }
      }
      return finish(0.5 * (a + b), prev);
    }
    prev2 = prev;
    s_prev2 = s_prev;
    prev = cur;
    s_prev = s_cur;
    t = tc;
  }
  report.geodesic.end_point = m.normalize(prev.head(n));
  report.geodesic.end_velocity = prev.segment(n, n);
  return report;
}

double estimate_conjugate_radius(const Manifold& m, int n_samples, double horizon, std::uint64_t seed, double step) {
  if (n_samples < 1) fail(ErrorCode::invalid_argument, "n_samples must be >= 1");
  constexpr int kAttempts = 64;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_samples; ++i) {
    bool done = false;
    for (int attempt = 0; attempt < kAttempts && !done; ++attempt) {
      Rng rng(split_seed(seed, static_cast<std::uint64_t>(i) * kAttempts + attempt));
      const Vec p = m.sample_point(rng);
      const Vec d = m.orthonormal_frame(p) * rng.unit_vector(m.dim());
      try {
        const ConjugateReport r = first_conjugate_time(m, p, d, horizon, step);
        if (r.first_conjugate_time) best = std::min(best, *r.first_conjugate_time);
        done = true;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::left_chart_domain && e.code() != ErrorCode::coordinate_singularity) throw;
      }
    }
    if (!done) fail(ErrorCode::sampling_budget_exceeded, "conjugate sampling kept hitting chart singularities");
  }
  return best;
}

}  // namespace riccilab
