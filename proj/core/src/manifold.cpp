#include "riccilab/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <fmt/format.h>

#include "riccilab/error.hpp"

namespace riccilab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kSampleBudget = 1'000'000;

double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

double wrap_symmetric(double a) {
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

using Vec3 = Eigen::Matrix<double, 3, 1>;

}  // namespace

struct Manifold::Spline {
  boost::math::interpolators::cardinal_cubic_b_spline<double> rho;
  double max_rho = 0.0;
};

std::string_view to_string(ManifoldKind kind) {
  switch (kind) {
    case ManifoldKind::euclidean: return "euclidean";
    case ManifoldKind::sphere: return "sphere";
    case ManifoldKind::hyperbolic: return "hyperbolic";
    case ManifoldKind::flat_torus: return "torus";
    case ManifoldKind::conformal_torus: return "conformal-torus";
    case ManifoldKind::ellipsoid: return "ellipsoid";
    case ManifoldKind::surface_of_revolution: return "revolution";
  }
  return "unknown";
}

Vec make_vec(std::initializer_list<double> values) {
  Vec v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v[i++] = x;
  return v;
}

// ---------------------------------------------------------------------------
// Construction

Manifold Manifold::euclidean(int n) {
  if (n < 2 || n > kMaxDim) fail(ErrorCode::invalid_argument, fmt::format("euclidean: need 2 <= n <= {}", kMaxDim));
  Manifold m;
  m.kind_ = ManifoldKind::euclidean;
  m.n_ = n;
  return m;
}

Manifold Manifold::sphere(int n, double K) {
  if (n < 2 || n > kMaxDim) fail(ErrorCode::invalid_argument, fmt::format("sphere: need 2 <= n <= {}", kMaxDim));
  if (!(K > 0.0) || !std::isfinite(K)) fail(ErrorCode::invalid_argument, "sphere: curvature must be positive");
  Manifold m;
  m.kind_ = ManifoldKind::sphere;
  m.n_ = n;
  m.K_ = K;
  return m;
}

Manifold Manifold::hyperbolic(int n, double K) {
  if (n < 2 || n > kMaxDim) fail(ErrorCode::invalid_argument, fmt::format("hyperbolic: need 2 <= n <= {}", kMaxDim));
  if (!(K < 0.0) || !std::isfinite(K)) fail(ErrorCode::invalid_argument, "hyperbolic: curvature must be negative");
  Manifold m;
  m.kind_ = ManifoldKind::hyperbolic;
  m.n_ = n;
  m.K_ = K;
  return m;
}

Manifold Manifold::flat_torus(const DeckLattice& lattice) {
  if (lattice.dim() < 2) fail(ErrorCode::invalid_argument, "torus: lattice dimension must be >= 2");
  Manifold m;
  m.kind_ = ManifoldKind::flat_torus;
  m.n_ = lattice.dim();
  m.lattice_ = lattice;
  return m;
}

Manifold Manifold::conformal_torus(const DeckLattice& lattice, double amplitude, double period) {
  if (lattice.dim() < 2) fail(ErrorCode::invalid_argument, "conformal-torus: lattice dimension must be >= 2");
  if (!(std::abs(amplitude) < 1.0)) fail(ErrorCode::invalid_argument, "conformal-torus: need |amp| < 1");
  if (!(period > 0.0) || !std::isfinite(period)) fail(ErrorCode::invalid_argument, "conformal-torus: period must be positive");
  // The conformal factor must be invariant under the deck group.
  for (int j = 0; j < lattice.dim(); ++j) {
    const double r = lattice.basis()(0, j) / period;
    if (std::abs(r - std::round(r)) > 1e-9) {
      fail(ErrorCode::invalid_argument,
           "conformal-torus: first coordinate of every lattice vector must be a multiple of the period");
    }
  }
  Manifold m;
  m.kind_ = ManifoldKind::conformal_torus;
  m.n_ = lattice.dim();
  m.lattice_ = lattice;
  m.shape_ = {amplitude, period};
  m.density_bound_ = std::pow(1.0 + std::abs(amplitude), 0.5 * m.n_);
  return m;
}

Manifold Manifold::ellipsoid(double a, double b, double c, int polar_axis) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0) || !std::isfinite(a + b + c)) {
    fail(ErrorCode::invalid_argument, "ellipsoid: semi-axes must be positive");
  }
  if (polar_axis < 0 || polar_axis > 2) fail(ErrorCode::invalid_argument, "ellipsoid: polar axis must be 0, 1 or 2");
  Manifold m;
  m.kind_ = ManifoldKind::ellipsoid;
  m.n_ = 2;
  m.shape_ = {a, b, c};
  m.polar_axis_ = polar_axis;
  const double s = std::max({a, b, c});
  m.density_bound_ = s * s;
  return m;
}

Manifold Manifold::surface_of_revolution(double u0, double u1, const std::vector<double>& rho) {
  if (!(u1 > u0) || !std::isfinite(u0) || !std::isfinite(u1)) fail(ErrorCode::invalid_argument, "revolution: need u0 < u1");
  if (rho.size() < 4) fail(ErrorCode::invalid_argument, "revolution: need at least 4 profile samples");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const bool end = (i == 0 || i + 1 == rho.size());
    if (!std::isfinite(rho[i]) || rho[i] < 0.0 || (!end && rho[i] <= 0.0)) {
      fail(ErrorCode::invalid_argument, "revolution: profile must be positive in the interior");
    }
  }
  Manifold m;
  m.kind_ = ManifoldKind::surface_of_revolution;
  m.n_ = 2;
  m.shape_ = {u0, u1};
  m.shape_.insert(m.shape_.end(), rho.begin(), rho.end());
  const double h = (u1 - u0) / static_cast<double>(rho.size() - 1);
  auto spline = std::make_shared<Spline>(Spline{
      boost::math::interpolators::cardinal_cubic_b_spline<double>(rho.begin(), rho.end(), u0, h), 0.0});
  double mx = 0.0;
  for (int i = 0; i <= 4000; ++i) mx = std::max(mx, spline->rho(u0 + (u1 - u0) * i / 4000.0));
  spline->max_rho = mx;
  m.density_bound_ = 1.05 * mx;
  // Interior positivity of the interpolant, not just of the samples.
  for (int i = 1; i < 4000; ++i) {
    const double u = u0 + (u1 - u0) * i / 4000.0;
    if (u - u0 >= kPoleBand && u1 - u >= kPoleBand && !(spline->rho(u) > 0.0)) {
      fail(ErrorCode::invalid_argument, "revolution: interpolated profile vanishes in the interior");
    }
  }
  m.spline_ = std::move(spline);
  return m;
}

Manifold Manifold::scaled(double c) const {
  if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorCode::invalid_argument, "scale must be positive");
  Manifold m = *this;
  m.scale_ = scale_ * c;
  return m;
}

// ---------------------------------------------------------------------------
// Identification

std::string Manifold::id() const {
  auto vec_list = [](const auto& begin, const auto& end) {
    std::string s = "[";
    for (auto it = begin; it != end; ++it) {
      if (it != begin) s += ",";
      s += fmt::format("{}", *it);
    }
    return s + "]";
  };
  auto basis_list = [&]() {
    const Mat& b = lattice_->basis();
    std::string s = "[";
    for (int j = 0; j < b.cols(); ++j) {
      if (j) s += ",";
      std::vector<double> col(b.col(j).data(), b.col(j).data() + b.rows());
      s += vec_list(col.begin(), col.end());
    }
    return s + "]";
  };
  std::string out;
  switch (kind_) {
    case ManifoldKind::euclidean: out = fmt::format("euclidean:n={}", n_); break;
    case ManifoldKind::sphere: out = fmt::format("sphere:n={},K={}", n_, K_); break;
    case ManifoldKind::hyperbolic: out = fmt::format("hyperbolic:n={},K={}", n_, K_); break;
    case ManifoldKind::flat_torus: out = "torus:basis=" + basis_list(); break;
    case ManifoldKind::conformal_torus:
      out = fmt::format("conformal-torus:basis={},amp={},period={}", basis_list(), shape_[0], shape_[1]);
      break;
    case ManifoldKind::ellipsoid:
      out = fmt::format("ellipsoid:a={},b={},c={}", shape_[0], shape_[1], shape_[2]);
      if (polar_axis_ != 2) out += fmt::format(",axis={}", "xyz"[polar_axis_]);
      break;
    case ManifoldKind::surface_of_revolution:
      out = fmt::format("revolution:u0={},u1={},rho={}", shape_[0], shape_[1],
                        vec_list(shape_.begin() + 2, shape_.end()));
      break;
  }
  if (scale_ != 1.0) out += fmt::format(",scale={}", scale_);
  return out;
}

bool Manifold::is_space_form() const {
  return kind_ == ManifoldKind::euclidean || kind_ == ManifoldKind::sphere ||
         kind_ == ManifoldKind::hyperbolic || kind_ == ManifoldKind::flat_torus;
}

bool Manifold::has_model_distance() const { return is_space_form(); }

bool Manifold::is_compact() const {
  return kind_ != ManifoldKind::euclidean && kind_ != ManifoldKind::hyperbolic;
}

std::optional<double> Manifold::constant_curvature() const {
  switch (kind_) {
    case ManifoldKind::euclidean:
    case ManifoldKind::flat_torus: return 0.0;
    case ManifoldKind::sphere:
    case ManifoldKind::hyperbolic: return K_ / (scale_ * scale_);
    default: return std::nullopt;
  }
}

double Manifold::sphere_radius() const { return scale_ / std::sqrt(K_); }

// ---------------------------------------------------------------------------
// Domain handling

bool Manifold::in_domain(const Vec& p, double margin) const {
  if (p.size() != n_ || !p.allFinite()) return false;
  const double band = kPoleBand + margin;
  switch (kind_) {
    case ManifoldKind::sphere:
      for (int i = 0; i + 1 < n_; ++i) {
        if (p[i] < band || p[i] > kPi - band) return false;
      }
      return true;
    case ManifoldKind::ellipsoid: return p[0] >= band && p[0] <= kPi - band;
    case ManifoldKind::surface_of_revolution: return p[0] >= shape_[0] + band && p[0] <= shape_[1] - band;
    case ManifoldKind::hyperbolic: return p.norm() < 1.0 - margin;
    default: return true;
  }
}

void Manifold::check_point(const Vec& p) const {
  if (p.size() != n_) {
    fail(ErrorCode::point_outside_chart, fmt::format("expected {} coordinates, got {}", n_, p.size()));
  }
  if (!p.allFinite()) fail(ErrorCode::point_outside_chart, "non-finite coordinates");
  switch (kind_) {
    case ManifoldKind::sphere:
    case ManifoldKind::ellipsoid: {
      const int last = kind_ == ManifoldKind::sphere ? n_ - 1 : 1;
      for (int i = 0; i < last; ++i) {
        if (p[i] < 0.0 || p[i] > kPi) {
          fail(ErrorCode::point_outside_chart, fmt::format("polar angle {} outside [0, pi]", p[i]));
        }
        if (p[i] < kPoleBand || p[i] > kPi - kPoleBand) {
          fail(ErrorCode::coordinate_singularity, fmt::format("polar angle {} inside the pole band", p[i]));
        }
      }
      break;
    }
    case ManifoldKind::surface_of_revolution:
      if (p[0] < shape_[0] || p[0] > shape_[1]) {
        fail(ErrorCode::point_outside_chart, fmt::format("profile parameter {} outside [u0, u1]", p[0]));
      }
      if (p[0] < shape_[0] + kPoleBand || p[0] > shape_[1] - kPoleBand) {
        fail(ErrorCode::coordinate_singularity, "profile parameter inside the end band");
      }
      break;
    case ManifoldKind::hyperbolic:
      if (!(p.norm() < 1.0)) fail(ErrorCode::point_outside_chart, "point outside the Poincare ball");
      break;
    default: break;
  }
}

Vec Manifold::normalize(const Vec& p) const {
  Vec q = p;
  switch (kind_) {
    case ManifoldKind::sphere: q[n_ - 1] = wrap_angle(q[n_ - 1]); break;
    case ManifoldKind::ellipsoid:
    case ManifoldKind::surface_of_revolution: q[1] = wrap_angle(q[1]); break;
    case ManifoldKind::flat_torus:
    case ManifoldKind::conformal_torus: q = lattice_->reduce(p); break;
    default: break;
  }
  return q;
}

Vec Manifold::chart_delta(const Vec& p, const Vec& q) const {
  Vec d = q - p;
  switch (kind_) {
    case ManifoldKind::sphere: d[n_ - 1] = wrap_symmetric(d[n_ - 1]); break;
    case ManifoldKind::ellipsoid:
    case ManifoldKind::surface_of_revolution: d[1] = wrap_symmetric(d[1]); break;
    case ManifoldKind::flat_torus:
    case ManifoldKind::conformal_torus: d = lattice_->closest_difference(d); break;
    default: break;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Metric

double Manifold::conformal_log_factor(const Vec& p, Vec* grad, Mat* hess) const {
  // g = e^{2f} I. Returns f and optionally its gradient and Hessian.
  if (kind_ == ManifoldKind::hyperbolic) {
    const double s = 1.0 - p.squaredNorm();
    if (grad) *grad = 2.0 * p / s;
    if (hess) *hess = 2.0 / s * Mat::Identity(n_, n_) + 4.0 / (s * s) * p * p.transpose();
    return std::log(2.0) - 0.5 * std::log(-K_) - std::log(s);
  }
  const double a = shape_[0];
  const double w = kTwoPi / shape_[1];
  const double lam = 1.0 + a * std::sin(w * p[0]);
  const double dlam = a * w * std::cos(w * p[0]);
  const double ddlam = -a * w * w * std::sin(w * p[0]);
  if (grad) {
    *grad = Vec::Zero(n_);
    (*grad)[0] = 0.5 * dlam / lam;
  }
  if (hess) {
    *hess = Mat::Zero(n_, n_);
    (*hess)(0, 0) = 0.5 * (ddlam * lam - dlam * dlam) / (lam * lam);
  }
  return 0.5 * std::log(lam);
}

void Manifold::ellipsoid_embedding(const Vec& p, Vec3* x, Eigen::Matrix<double, 3, 2>* j,
                                   std::array<Vec3, 3>* second) const {
  const int ax = polar_axis_;
  const int q = (ax + 1) % 3;
  const int r = (ax + 2) % 3;
  const double sp = shape_[ax], sq = shape_[q], sr = shape_[r];
  const double st = std::sin(p[0]), ct = std::cos(p[0]);
  const double sf = std::sin(p[1]), cf = std::cos(p[1]);
  if (x) {
    (*x)[ax] = sp * ct;
    (*x)[q] = sq * st * cf;
    (*x)[r] = sr * st * sf;
  }
  if (j) {
    (*j)(ax, 0) = -sp * st;
    (*j)(q, 0) = sq * ct * cf;
    (*j)(r, 0) = sr * ct * sf;
    (*j)(ax, 1) = 0.0;
    (*j)(q, 1) = -sq * st * sf;
    (*j)(r, 1) = sr * st * cf;
  }
  if (second) {
    Vec3& tt = (*second)[0];
    Vec3& tf = (*second)[1];
    Vec3& ff = (*second)[2];
    tt[ax] = -sp * ct;
    tt[q] = -sq * st * cf;
    tt[r] = -sr * st * sf;
    tf[ax] = 0.0;
    tf[q] = -sq * ct * sf;
    tf[r] = sr * ct * cf;
    ff[ax] = 0.0;
    ff[q] = -sq * st * cf;
    ff[r] = -sr * st * sf;
  }
}

Mat Manifold::base_metric(const Vec& p) const {
  switch (kind_) {
    case ManifoldKind::euclidean:
    case ManifoldKind::flat_torus: return Mat::Identity(n_, n_);
    case ManifoldKind::sphere: {
      Mat g = Mat::Zero(n_, n_);
      double prod = 1.0 / K_;
      for (int i = 0; i < n_; ++i) {
        g(i, i) = prod;
        if (i + 1 < n_) prod *= std::sin(p[i]) * std::sin(p[i]);
      }
      return g;
    }
    case ManifoldKind::hyperbolic:
    case ManifoldKind::conformal_torus: {
      const double f = conformal_log_factor(p, nullptr, nullptr);
      return std::exp(2.0 * f) * Mat::Identity(n_, n_);
    }
    case ManifoldKind::ellipsoid: {
      Eigen::Matrix<double, 3, 2> j;
      ellipsoid_embedding(p, nullptr, &j, nullptr);
      return j.transpose() * j;
    }
    case ManifoldKind::surface_of_revolution: {
      Mat g = Mat::Identity(2, 2);
      const double rho = spline_->rho(p[0]);
      g(1, 1) = rho * rho;
      return g;
    }
  }
  return Mat::Identity(n_, n_);
}

std::array<Mat, kMaxDim> Manifold::base_metric_derivative(const Vec& p) const {
  std::array<Mat, kMaxDim> dg;
  for (int l = 0; l < n_; ++l) dg[l] = Mat::Zero(n_, n_);
  switch (kind_) {
    case ManifoldKind::euclidean:
    case ManifoldKind::flat_torus: break;
    case ManifoldKind::sphere: {
      // g_ii = K^{-1} prod_{k<i} sin^2(theta_k).
      for (int l = 0; l + 1 < n_; ++l) {
        for (int i = l + 1; i < n_; ++i) {
          double prod = 1.0 / K_;
          for (int k = 0; k < i; ++k) {
            const double s = std::sin(p[k]);
            prod *= (k == l) ? 2.0 * s * std::cos(p[k]) : s * s;
          }
          dg[l](i, i) = prod;
        }
      }
      break;
    }
    case ManifoldKind::hyperbolic:
    case ManifoldKind::conformal_torus: {
      Vec grad;
      const double f = conformal_log_factor(p, &grad, nullptr);
      const double lam = std::exp(2.0 * f);
      for (int l = 0; l < n_; ++l) dg[l] = 2.0 * lam * grad[l] * Mat::Identity(n_, n_);
      break;
    }
    case ManifoldKind::ellipsoid: {
      Eigen::Matrix<double, 3, 2> j;
      std::array<Vec3, 3> second;
      ellipsoid_embedding(p, nullptr, &j, &second);
      auto d2 = [&](int a, int b) -> const Vec3& { return second[a + b]; };
      for (int l = 0; l < 2; ++l)
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) dg[l](a, b) = d2(l, a).dot(j.col(b)) + j.col(a).dot(d2(l, b));
      break;
    }
    case ManifoldKind::surface_of_revolution: {
      const double rho = spline_->rho(p[0]);
      dg[0](1, 1) = 2.0 * rho * spline_->rho.prime(p[0]);
      break;
    }
  }
  return dg;
}

Mat Manifold::metric_at(const Vec& p) const {
  check_point(p);
  return scale_ * scale_ * base_metric(p);
}

std::array<Mat, kMaxDim> Manifold::metric_derivative_at(const Vec& p) const {
  check_point(p);
  auto dg = base_metric_derivative(p);
  for (int l = 0; l < n_; ++l) dg[l] *= scale_ * scale_;
  return dg;
}

namespace {

// Closed-form inverse for the fixed sizes; the dynamic LU path is several
// times slower and sits in the innermost geodesic loop.
Mat small_inverse(const Mat& g) {
  switch (g.rows()) {
    case 1: return Mat::Constant(1, 1, 1.0 / g(0, 0));
    case 2: return Eigen::Matrix2d(g).inverse();
    case 3: return Eigen::Matrix3d(g).inverse();
    default: return Eigen::Matrix4d(g).inverse();
  }
}

}  // namespace

Christoffel Manifold::christoffel_at(const Vec& p) const {
  check_point(p);
  Christoffel gam(n_);
  if (kind_ == ManifoldKind::euclidean || kind_ == ManifoldKind::flat_torus) return gam;
  if (kind_ == ManifoldKind::hyperbolic || kind_ == ManifoldKind::conformal_torus) {
    Vec f;
    conformal_log_factor(p, &f, nullptr);
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          gam(k, i, j) = (i == k ? f[j] : 0.0) + (j == k ? f[i] : 0.0) - (i == j ? f[k] : 0.0);
    return gam;
  }
  const Mat ginv = small_inverse(base_metric(p));
  const auto dg = base_metric_derivative(p);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        double s = 0.0;
        for (int l = 0; l < n_; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        gam(k, i, j) = 0.5 * s;
        gam(k, j, i) = 0.5 * s;
      }
  return gam;
}

Christoffel Manifold::christoffel_fd(const Vec& p, double h) const {
  check_point(p);
  std::array<Mat, kMaxDim> dg;
  for (int l = 0; l < n_; ++l) {
    Vec a = p, b = p;
    a[l] += h;
    b[l] -= h;
    dg[l] = (base_metric(a) - base_metric(b)) / (2.0 * h);
  }
  const Mat ginv = small_inverse(base_metric(p));
  Christoffel gam(n_);
  for (int k = 0; k < n_; ++k)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) {
        double s = 0.0;
        for (int l = 0; l < n_; ++l) s += ginv(k, l) * (dg[i](l, j) + dg[j](l, i) - dg[l](i, j));
        gam(k, i, j) = 0.5 * s;
      }
  return gam;
}

ChristoffelDerivative Manifold::christoffel_derivative_at(const Vec& p) const {
  check_point(p);
  ChristoffelDerivative d(n_);
  if (kind_ == ManifoldKind::euclidean || kind_ == ManifoldKind::flat_torus) return d;
  if (kind_ == ManifoldKind::hyperbolic || kind_ == ManifoldKind::conformal_torus) {
    Mat h;
    conformal_log_factor(p, nullptr, &h);
    for (int l = 0; l < n_; ++l)
      for (int k = 0; k < n_; ++k)
        for (int i = 0; i < n_; ++i)
          for (int j = 0; j < n_; ++j)
            d(l, k, i, j) = (i == k ? h(j, l) : 0.0) + (j == k ? h(i, l) : 0.0) - (i == j ? h(k, l) : 0.0);
    return d;
  }
  constexpr double h = 1e-5;
  for (int l = 0; l < n_; ++l) {
    Vec a = p, b = p;
    a[l] += h;
    b[l] -= h;
    const Christoffel ga = christoffel_at(a);
    const Christoffel gb = christoffel_at(b);
    for (int k = 0; k < n_; ++k)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) d(l, k, i, j) = (ga(k, i, j) - gb(k, i, j)) / (2.0 * h);
  }
  return d;
}

Curvature Manifold::curvature_at(const Vec& p) const {
  check_point(p);
  Curvature r(n_);
  if (kind_ == ManifoldKind::euclidean || kind_ == ManifoldKind::flat_torus) return r;
  if (kind_ == ManifoldKind::sphere || kind_ == ManifoldKind::hyperbolic) {
    // R(X,Y)Z = K (<Y,Z> X - <X,Z> Y); the (1,3) tensor is scale invariant.
    const Mat g = base_metric(p);
    for (int l = 0; l < n_; ++l)
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
          for (int k = 0; k < n_; ++k)
            r(l, i, j, k) = K_ * (g(j, k) * (l == i ? 1.0 : 0.0) - g(i, k) * (l == j ? 1.0 : 0.0));
    return r;
  }
  const Christoffel gam = christoffel_at(p);
  const ChristoffelDerivative dgam = christoffel_derivative_at(p);
  for (int l = 0; l < n_; ++l)
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        for (int k = 0; k < n_; ++k) {
          double s = dgam(i, l, j, k) - dgam(j, l, i, k);
          for (int m = 0; m < n_; ++m) s += gam(l, i, m) * gam(m, j, k) - gam(l, j, m) * gam(m, i, k);
          r(l, i, j, k) = s;
        }
  return r;
}

double Manifold::sectional_curvature(const Vec& p, const Vec& u, const Vec& v) const {
  const Mat g = metric_at(p);
  const Vec ruvv = curvature_at(p).apply(u, v, v);
  const double area2 = u.dot(g * u) * v.dot(g * v) - std::pow(u.dot(g * v), 2);
  if (!(area2 > 0.0)) fail(ErrorCode::invalid_argument, "sectional curvature needs independent vectors");
  return ruvv.dot(g * u) / area2;
}

double Manifold::inner(const Vec& p, const Vec& u, const Vec& v) const { return u.dot(metric_at(p) * v); }

double Manifold::norm(const Vec& p, const Vec& u) const { return std::sqrt(inner(p, u, u)); }

double Manifold::angle(const Vec& p, const Vec& u, const Vec& v) const {
  const Mat g = metric_at(p);
  const double nu = std::sqrt(u.dot(g * u));
  const double nv = std::sqrt(v.dot(g * v));
  if (!(nu > 0.0 && nv > 0.0)) fail(ErrorCode::invalid_argument, "angle of a zero vector");
  // Orthonormal coordinates, then the atan2 form, which stays accurate near 0 and pi.
  const Mat L = g.llt().matrixL();
  const Vec a = L.transpose() * u / nu;
  const Vec b = L.transpose() * v / nv;
  return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

Mat Manifold::orthonormal_frame(const Vec& p) const {
  const Mat g = metric_at(p);
  const Mat L = g.llt().matrixL();
  return L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n_, n_));
}

// ---------------------------------------------------------------------------
// Sphere embedding

Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1> Manifold::sphere_embed(const Vec& p) const {
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1> u(n_ + 1);
  double prod = 1.0;
  for (int k = 0; k < n_ - 1; ++k) {
    u[k] = prod * std::cos(p[k]);
    prod *= std::sin(p[k]);
  }
  u[n_ - 1] = prod * std::cos(p[n_ - 1]);
  u[n_] = prod * std::sin(p[n_ - 1]);
  return u;
}

Vec Manifold::sphere_chart(const Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>& u) const {
  Vec p(n_);
  for (int k = 0; k < n_ - 1; ++k) {
    const double tail = u.tail(n_ - k).norm();
    p[k] = std::atan2(tail, u[k]);
  }
  p[n_ - 1] = wrap_angle(std::atan2(u[n_], u[n_ - 1]));
  return p;
}

Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> Manifold::sphere_jacobian(
    const Vec& p) const {
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> J(n_ + 1, n_);
  J.setZero();
  // u_m is a product of sines times one trailing cosine or sine.
  for (int l = 0; l < n_; ++l) {
    for (int m = 0; m <= n_; ++m) {
      double val = 1.0;
      bool depends = false;
      const int trailing = std::min(m, n_ - 1);
      for (int k = 0; k < trailing; ++k) {
        if (k == l) {
          val *= std::cos(p[k]);
          depends = true;
        } else {
          val *= std::sin(p[k]);
        }
      }
      double t;
      if (m < n_ - 1) {
        t = (trailing == l) ? -std::sin(p[trailing]) : std::cos(p[trailing]);
        if (trailing == l) depends = true;
      } else if (m == n_ - 1) {
        t = (l == n_ - 1) ? -std::sin(p[n_ - 1]) : std::cos(p[n_ - 1]);
        if (l == n_ - 1) depends = true;
      } else {
        t = (l == n_ - 1) ? std::cos(p[n_ - 1]) : std::sin(p[n_ - 1]);
        if (l == n_ - 1) depends = true;
      }
      J(m, l) = depends ? val * t : 0.0;
    }
  }
  return J;
}

// ---------------------------------------------------------------------------
// Distances and sampling

double Manifold::model_distance(const Vec& p, const Vec& q) const {
  check_point(p);
  check_point(q);
  switch (kind_) {
    case ManifoldKind::euclidean: return scale_ * (q - p).norm();
    case ManifoldKind::flat_torus: return scale_ * lattice_->closest_difference(q - p).norm();
    case ManifoldKind::sphere: {
      const auto a = sphere_embed(p);
      const auto b = sphere_embed(q);
      return sphere_radius() * 2.0 * std::atan2((a - b).norm(), (a + b).norm());
    }
    case ManifoldKind::hyperbolic: {
      const double s = std::sqrt((1.0 - p.squaredNorm()) * (1.0 - q.squaredNorm()));
      return scale_ * 2.0 / std::sqrt(-K_) * std::asinh((q - p).norm() / s);
    }
    default:
      fail(ErrorCode::unsupported_manifold, fmt::format("no closed-form distance on {}", to_string(kind_)));
  }
}

Vec Manifold::sample_point(Rng& rng) const {
  for (int attempt = 0; attempt < kSampleBudget; ++attempt) {
    switch (kind_) {
      case ManifoldKind::euclidean: return rng.in_unit_ball(n_);
      case ManifoldKind::hyperbolic: return 0.5 * rng.in_unit_ball(n_);
      case ManifoldKind::sphere: {
        Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1> u(n_ + 1);
        for (int i = 0; i <= n_; ++i) u[i] = rng.normal();
        const double r = u.norm();
        if (r < 1e-12) continue;
        const Vec p = sphere_chart(u / r);
        if (in_domain(p)) return p;
        continue;
      }
      case ManifoldKind::flat_torus: {
        Vec c(n_);
        for (int i = 0; i < n_; ++i) c[i] = rng.uniform();
        return lattice_->basis() * c;
      }
      case ManifoldKind::conformal_torus: {
        Vec c(n_);
        for (int i = 0; i < n_; ++i) c[i] = rng.uniform();
        const Vec p = lattice_->basis() * c;
        const double dens = std::pow(base_metric(p)(0, 0), 0.5 * n_);
        if (rng.uniform() * density_bound_ < dens) return p;
        continue;
      }
      case ManifoldKind::ellipsoid:
      case ManifoldKind::surface_of_revolution: {
        Vec p(2);
        if (kind_ == ManifoldKind::ellipsoid) {
          p[0] = rng.uniform(0.0, kPi);
        } else {
          p[0] = rng.uniform(shape_[0], shape_[1]);
        }
        p[1] = rng.uniform(0.0, kTwoPi);
        const double u = rng.uniform();
        if (!in_domain(p)) continue;
        const double dens = std::sqrt(base_metric(p).determinant());
        if (u * density_bound_ < dens) return p;
        continue;
      }
    }
  }
  fail(ErrorCode::sampling_budget_exceeded, "point sampling rejected too often");
}

}  // namespace riccilab
