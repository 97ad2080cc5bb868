#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riccilab/lattice.hpp"
#include "riccilab/rng.hpp"
#include "riccilab/types.hpp"

namespace riccilab {

enum class ManifoldKind {
  euclidean,
  sphere,
  hyperbolic,
  flat_torus,
  conformal_torus,
  ellipsoid,
  surface_of_revolution,
};

std::string_view to_string(ManifoldKind kind);

/// Every catalog manifold is covered by a single chart (chart id 0), so points
/// and tangent vectors are plain coordinate vectors in that chart.
struct ChartPoint {
  int chart_id = 0;
  Vec coords;
};

struct TangentVector {
  ChartPoint base;
  Vec components;
};

/// Immutable Riemannian manifold given in one coordinate chart.
///
/// Charts:
///  * sphere(n, K): hyperspherical coordinates (theta_1..theta_{n-1}, phi) on
///    the sphere of radius 1/sqrt(K); each theta_i is kept out of a band of
///    width 1e-3 around 0 and pi, phi is periodic.
///  * hyperbolic(n, K): Poincare ball, g = 4 / (|K| (1 - |x|^2)^2) I.
///  * flat_torus(L): Cartesian coordinates on R^n, points identified modulo L.
///  * conformal_torus(L, a, P): g = (1 + a sin(2 pi x_0 / P)) I modulo L.
///  * ellipsoid(a, b, c): polar angle theta and azimuth phi around the chosen
///    polar axis, with the same pole band as the sphere.
///  * surface_of_revolution: g = du^2 + rho(u)^2 dphi^2 with rho a cubic
///    spline through equally spaced samples on [u0, u1].
/// Any of them can be rescaled, g -> c^2 g.
class Manifold {
 public:
  static constexpr double kPoleBand = 1e-3;

  static Manifold euclidean(int n);
  static Manifold sphere(int n, double K);
  static Manifold hyperbolic(int n, double K);
  static Manifold flat_torus(const DeckLattice& lattice);
  static Manifold conformal_torus(const DeckLattice& lattice, double amplitude, double period);
  /// polar_axis: 0 = x, 1 = y, 2 = z.
  static Manifold ellipsoid(double a, double b, double c, int polar_axis = 2);
  static Manifold surface_of_revolution(double u0, double u1, const std::vector<double>& rho);
  /// Parses ids such as "sphere:n=2,K=1" or "torus:basis=[[1,0],[0,1]],scale=2".
  static Manifold parse(std::string_view id);

  /// The same manifold with metric c^2 g.
  Manifold scaled(double c) const;

  ManifoldKind kind() const { return kind_; }
  int dim() const { return n_; }
  double curvature_param() const { return K_; }
  double scale() const { return scale_; }
  const std::optional<DeckLattice>& lattice() const { return lattice_; }
  const std::vector<double>& shape_params() const { return shape_; }
  int polar_axis() const { return polar_axis_; }
  std::string id() const;

  bool is_space_form() const;
  bool has_model_distance() const;
  bool is_compact() const;
  /// Sectional curvature of a model space, if constant.
  std::optional<double> constant_curvature() const;

  /// True when p lies in the chart domain and at least `margin` away from any
  /// excluded band (pole bands, the boundary of the Poincare ball).
  bool in_domain(const Vec& p, double margin = 0.0) const;
  /// Raises point_outside_chart or coordinate_singularity.
  void check_point(const Vec& p) const;
  /// Canonical coordinates: periodic coordinates wrapped, torus points
  /// reduced to the fundamental domain.
  Vec normalize(const Vec& p) const;
  /// Coordinate displacement from p to q with periodic identifications
  /// resolved to the shortest representative.
  Vec chart_delta(const Vec& p, const Vec& q) const;

  Mat metric_at(const Vec& p) const;
  /// Partial derivatives d_l g_ij, stored as dg[l](i, j).
  std::array<Mat, kMaxDim> metric_derivative_at(const Vec& p) const;
  Christoffel christoffel_at(const Vec& p) const;
  /// Christoffel symbols from central differences of metric_at (h = 1e-5).
  Christoffel christoffel_fd(const Vec& p, double h = 1e-5) const;
  ChristoffelDerivative christoffel_derivative_at(const Vec& p) const;
  Curvature curvature_at(const Vec& p) const;
  double sectional_curvature(const Vec& p, const Vec& u, const Vec& v) const;

  double inner(const Vec& p, const Vec& u, const Vec& v) const;
  double norm(const Vec& p, const Vec& u) const;
  /// Angle in [0, pi] between two nonzero tangent vectors at p.
  double angle(const Vec& p, const Vec& u, const Vec& v) const;
  /// Columns form a g-orthonormal basis of T_pM.
  Mat orthonormal_frame(const Vec& p) const;

  /// Closed-form distance; raises unsupported_manifold when none exists.
  double model_distance(const Vec& p, const Vec& q) const;

  /// Random point: Riemannian-uniform on compact manifolds, uniform in the
  /// unit coordinate ball on euclidean(n) and in the coordinate ball of
  /// radius 1/2 on hyperbolic(n).
  Vec sample_point(Rng& rng) const;

  // Sphere helpers (unit sphere embedding; scale by the radius separately).
  Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1> sphere_embed(const Vec& p) const;
  Vec sphere_chart(const Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>& u) const;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim> sphere_jacobian(
      const Vec& p) const;

  /// Radius of the round sphere, 1/sqrt(K) times the scale.
  double sphere_radius() const;

  /// True for metrics of the form g = e^{2f} I in the chart (hyperbolic,
  /// conformal torus).
  bool is_conformally_flat() const {
    return kind_ == ManifoldKind::hyperbolic || kind_ == ManifoldKind::conformal_torus;
  }
  /// f for the unscaled metric, with optional gradient and Hessian. Only
  /// meaningful when is_conformally_flat().
  double conformal_log_factor(const Vec& p, Vec* grad, Mat* hess) const;

 private:
  Manifold() = default;

  struct Spline;

  Mat base_metric(const Vec& p) const;
  std::array<Mat, kMaxDim> base_metric_derivative(const Vec& p) const;
  void ellipsoid_embedding(const Vec& p, Eigen::Matrix<double, 3, 1>* x,
                           Eigen::Matrix<double, 3, 2>* j,
                           std::array<Eigen::Matrix<double, 3, 1>, 3>* second) const;

  ManifoldKind kind_ = ManifoldKind::euclidean;
  int n_ = 2;
  double K_ = 0.0;
  double scale_ = 1.0;
  std::optional<DeckLattice> lattice_;
  std::vector<double> shape_;
  int polar_axis_ = 2;
  double density_bound_ = 1.0;
  std::shared_ptr<const Spline> spline_;
};

// Free-function spellings of the catalog operations.
inline Mat metric_at(const Manifold& m, const Vec& p) { return m.metric_at(p); }
inline Christoffel christoffel_at(const Manifold& m, const Vec& p) { return m.christoffel_at(p); }
inline Curvature curvature_at(const Manifold& m, const Vec& p) { return m.curvature_at(p); }
inline double model_distance(const Manifold& m, const Vec& p, const Vec& q) {
  return m.model_distance(p, q);
}

/// Builds a coordinate vector from a braced list.
Vec make_vec(std::initializer_list<double> values);

}  // namespace riccilab
