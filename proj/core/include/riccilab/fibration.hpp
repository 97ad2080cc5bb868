#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "riccilab/geodesic.hpp"

namespace riccilab {

/// Mixed-pair part of an admissible metric on the disjoint union M + N.
struct CrossDistance {
  std::string name;
  /// Upper bound on |d_M(x, x') - d_N(x, x')| under the chart identification.
  double distortion = 0.0;
  std::function<double(const Vec& x_in_m, const Vec& y_in_n)> fn;

  double operator()(const Vec& x, const Vec& y) const { return fn(x, y); }
};

/// Distortion of the chart identification between M and N. Supported pairs:
/// two tori (flat or conformal) over the same lattice, or two round spheres
/// of equal dimension. Raises unsupported_manifold otherwise.
double chart_distortion(const Manifold& m, const Manifold& n);

/// d(x, y) = d_N(x, y) + delta / 2, with x read in N's chart.
CrossDistance identity_chart_distance(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n);

/// d(x, y) = delta / 2 + min over z of d_M(x, z) + d_N(z, y), z ranging over x
/// and a coordinate grid of the given spacing. Never larger than the
/// identity-chart value.
CrossDistance graph_distance(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n,
                             double grid_spacing);

/// "identity-chart" or "graph-distance"; anything else raises invalid_argument.
CrossDistance make_cross_distance(std::string_view name, std::shared_ptr<const Manifold> m,
                                  std::shared_ptr<const Manifold> n, double grid_spacing);

struct CouplingReport {
  double max_pairing = 0.0;
  /// Smallest distance between distinct net points found (infinity if none
  /// are within 2 eps of each other).
  double min_separation_m = 0.0;
  double min_separation_n = 0.0;
  /// Largest distance from a sampled point to its net (upper bound).
  double density_m = 0.0;
  double density_n = 0.0;
  int density_samples = 0;
  bool separated = false;  ///< both nets eps-separated
  bool dense = false;      ///< both nets 7 eps-dense on the samples
};

struct GHCoupling {
  std::shared_ptr<const Manifold> m;
  std::shared_ptr<const Manifold> n;
  CrossDistance cross;
  double epsilon = 0.0;
  std::vector<Vec> net_m;
  std::vector<Vec> net_n;  ///< net_n[i] is paired with net_m[i]
  std::vector<double> pairing;
  CouplingReport report;
};

struct CouplingOptions {
  int density_samples = 256;
};

/// Greedy net on M over a seeded candidate grid of spacing eps/2, each point
/// paired with its chart image in N; a candidate is kept only if both it and
/// its partner are more than eps from every kept point. Nets are supported
/// on flat and conformal tori and on round spheres. Raises pairing_failure
/// when a partner is not within eps in the cross distance.
GHCoupling build_coupling(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n, CrossDistance cross,
                          double eps, std::uint64_t seed, const CouplingOptions& opts = {});

/// 1 on [0, sigma/2], 0 on [sigma, inf), quintic smoothstep in between.
double chi(double t, double sigma);
double chi_derivative(double t, double sigma);
/// max |chi'| = 15 / (4 sigma).
double chi_lipschitz(double sigma);

/// Sorted sparse vector in R^S.
struct SparseVector {
  std::vector<int> index;
  std::vector<double> value;

  double at(int i) const;
  double norm() const;
};

double distance(const SparseVector& a, const SparseVector& b);

struct FibrationOptions {
  int quadrature_samples = 256;
  std::uint64_t seed = 0;
  /// Conjugate radius and angle comparison radius of M, when known; sigma
  /// must stay below R = min(inj N, r0, rac) / 4.
  std::optional<double> r0;
  std::optional<double> rac;
  /// Probe points per axis of N for the reach estimate.
  int reach_probes = 16;
  int max_iterations = 200;
};

struct Projection {
  Vec point;
  double residual = 0.0;             ///< |f_N(point) - target|
  double tangential_residual = 0.0;  ///< part of the residual along the image
  int iterations = 0;
  int start_index = 0;
};

struct FibrationPoint {
  Vec x;
  Vec image;
  double displacement = 0.0;  ///< cross distance d(x, f(x))
  double residual = 0.0;
  double tangential_residual = 0.0;
  int iterations = 0;
};

enum class SubmersionMode {
  finite_difference,  ///< differences of f itself
  chain_rule,         ///< analytic df_M composed with differences of the projection
};

struct SubmersionReport {
  Vec x;
  /// f(x) itself, as fibration_map would report it.
  FibrationPoint point;
  Mat differential;  ///< orthonormal frames at x and f(x)
  Vec singular_values;
  double min_singular_value = 0.0;
};

/// f = f_N^{-1} o pi o f_M for a coupling and bump scale sigma. N must be a
/// flat torus or a round sphere. Evaluation caches ball samples and is not
/// safe to share between threads.
class FibrationMap {
 public:
  FibrationMap(GHCoupling coupling, double sigma, const FibrationOptions& opts = {});
  ~FibrationMap();
  FibrationMap(FibrationMap&&) noexcept;
  FibrationMap& operator=(FibrationMap&&) noexcept;

  const GHCoupling& coupling() const;
  double sigma() const;
  int size() const;
  double radius_limit() const;
  /// Estimated reach of f_N(N) in R^S.
  double reach() const;

  /// Components of f_M at x. When `gradients` is given it receives, per
  /// entry, the gradient in an orthonormal frame at x.
  SparseVector f_M(const Vec& x, std::vector<Vec>* gradients = nullptr) const;
  /// f_N at y; `jacobian` receives chart-coordinate gradients per entry.
  SparseVector f_N(const Vec& y, std::vector<Vec>* jacobian = nullptr) const;

  /// Nearest point of the image to `target`, by Levenberg-Marquardt from the
  /// net point with the largest target component (or from `start`).
  Projection project(const SparseVector& target, const std::optional<Vec>& start = std::nullopt) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct MapEvaluation {
  SparseVector f_m;
  /// Index of the net point the projection starts from.
  int start_index = 0;
};

MapEvaluation evaluate_maps(const FibrationMap& fm, const Vec& x);

/// Raises outside_reach when the residual exceeds the reach estimate and
/// optimizer_divergence when the projection does not converge.
FibrationPoint fibration_map(const FibrationMap& fm, const Vec& x);

SubmersionReport check_submersion(const FibrationMap& fm, const Vec& x, double fd_step = 1e-4,
                                  SubmersionMode mode = SubmersionMode::chain_rule);

/// Unit-speed geodesic from `start` along `direction` (chart components,
/// normalized internally) for arc length `length`.
struct GeodesicSegment {
  Vec start;
  Vec direction;
  double length = 0.0;
};

struct AngleTransfer {
  double theta = 0.0;
  double theta_prime = 0.0;
  double mu = 1.0;
  double defect = 0.0;  ///< |theta - mu theta'| - (1 - mu) pi
  std::array<double, 2> start_gap{};
  std::array<double, 2> end_gap{};
};

/// Angle between c1, c2 at their common start in M versus c1', c2' in N.
/// Raises hypothesis_violated when corresponding start or end points are
/// more than nu apart in the cross distance, or when c1, c2 (c1', c2') do not
/// share a start point.
AngleTransfer angle_transfer_report(const GHCoupling& coupling, const GeodesicSegment& c1, const GeodesicSegment& c2,
                                    const GeodesicSegment& c1p, const GeodesicSegment& c2p, double mu, double nu);

std::string fibration_csv_header();
std::string fibration_csv_row(const FibrationPoint& p, double min_singular_value);

}  // namespace riccilab
