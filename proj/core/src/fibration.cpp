#include "riccilab/fibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "riccilab/error.hpp"
#include "riccilab/rng.hpp"

namespace riccilab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPi = std::numbers::pi;

bool is_torus(const Manifold& m) {
  return m.kind() == ManifoldKind::flat_torus || m.kind() == ManifoldKind::conformal_torus;
}

// Metric length per unit of chart length on a torus: lo <= |v|_g / |v| <= hi.
struct Stretch {
  double lo = 1.0;
  double hi = 1.0;
};

Stretch stretch(const Manifold& m) {
  if (m.kind() == ManifoldKind::conformal_torus) {
    const double a = std::abs(m.shape_params()[0]);
    return {m.scale() * std::sqrt(1.0 - a), m.scale() * std::sqrt(1.0 + a)};
  }
  return {m.scale(), m.scale()};
}

struct Bracket {
  double lo = 0.0;
  double hi = kInf;
};

GeodesicOptions short_range() {
  GeodesicOptions o;
  o.multi_start = false;
  o.with_samples = false;
  return o;
}

double exact_distance(const Manifold& m, const Vec& x, const Vec& y) {
  if (m.has_model_distance()) return m.model_distance(x, y);
  return geodesic_distance(m, x, y, short_range()).length;
}

// Cheap two-sided bounds; exact on manifolds with a closed-form distance.
Bracket distance_bracket(const Manifold& m, const Stretch& st, const Vec& x, const Vec& y) {
  if (m.kind() == ManifoldKind::conformal_torus) {
    const double r = m.lattice()->closest_difference(y - x).norm();
    return {st.lo * r, st.hi * r};
  }
  const double d = exact_distance(m, x, y);
  return {d, d};
}

// Distance and unit initial direction (chart components).
DistanceResult distance_with_direction(const Manifold& m, const Vec& x, const Vec& y) {
  if (m.kind() == ManifoldKind::flat_torus) {
    const Vec delta = m.lattice()->closest_difference(y - x);
    const double r = delta.norm();
    DistanceResult out;
    out.length = m.scale() * r;
    out.direction = r > 0.0 ? Vec(delta / (r * m.scale())) : Vec(Vec::Zero(x.size()));
    return out;
  }
  return geodesic_distance(m, x, y, short_range());
}

double torus_covering_radius(const Manifold& m) {
  // Covering radius of a lattice is at most half the length of the diagonal
  // of any basis parallelotope; the reduced basis makes this tight for
  // orthogonal lattices.
  const Mat& b = m.lattice()->reduced_basis();
  return 0.5 * std::sqrt(b.colwise().squaredNorm().sum());
}

double injectivity_radius(const Manifold& n) {
  if (n.kind() == ManifoldKind::flat_torus) return 0.5 * n.scale() * n.lattice()->shortest_length();
  if (n.kind() == ManifoldKind::sphere) return kPi * n.sphere_radius();
  fail(ErrorCode::unsupported_manifold, fmt::format("N must be a flat torus or a round sphere, got {}", n.id()));
}

// Uniform cell grid over the fundamental domain of a torus, in lattice
// coefficients; a plain list elsewhere.
class NetIndex {
 public:
  NetIndex(const Manifold& m, double cell_radius) {
    if (!is_torus(m)) return;
    const int n = m.dim();
    inverse_ = m.lattice()->inverse();
    cells_.assign(1, {});
    k_.resize(n);
    row_norm_.resize(n);
    std::size_t total = 1;
    for (int j = 0; j < n; ++j) {
      row_norm_[j] = inverse_.row(j).norm();
      const double width = cell_radius * row_norm_[j];
      k_[j] = std::max(1, static_cast<int>(std::floor(1.0 / std::max(width, 1e-9))));
      k_[j] = static_cast<int>(std::min<std::size_t>(k_[j], 4096));
      total *= static_cast<std::size_t>(k_[j]);
    }
    while (total > (1u << 22)) {
      total = 1;
      for (auto& k : k_) {
        k = std::max(1, k / 2);
        total *= static_cast<std::size_t>(k);
      }
    }
    cells_.assign(total, {});
  }

  void insert(int id, const Vec& p) {
    if (cells_.empty()) {
      all_.push_back(id);
      return;
    }
    cells_[cell_of(p)].push_back(id);
  }

  // Calls f(id) for every stored point that may lie within chart radius r of
  // x (a superset).
  template <typename F>
  void near(const Vec& x, double r, F&& f) const {
    if (cells_.empty()) {
      for (int id : all_) f(id);
      return;
    }
    const int n = static_cast<int>(k_.size());
    std::array<int, kMaxDim> base{}, span{}, count{}, at{};
    const Vec c = inverse_ * x;
    for (int j = 0; j < n; ++j) {
      const double frac = c[j] - std::floor(c[j]);
      base[j] = std::min(k_[j] - 1, static_cast<int>(frac * k_[j]));
      span[j] = static_cast<int>(std::ceil(r * row_norm_[j] * k_[j]));
      if (2 * span[j] + 1 >= k_[j]) {
        base[j] = 0;
        span[j] = 0;
        count[j] = k_[j];
      } else {
        base[j] -= span[j];
        count[j] = 2 * span[j] + 1;
      }
    }
    for (;;) {
      std::size_t idx = 0;
      for (int j = 0; j < n; ++j) {
        const int cj = ((base[j] + at[j]) % k_[j] + k_[j]) % k_[j];
        idx = idx * static_cast<std::size_t>(k_[j]) + static_cast<std::size_t>(cj);
      }
      for (int id : cells_[idx]) f(id);
      int j = n - 1;
      while (j >= 0 && ++at[j] == count[j]) at[j--] = 0;
      if (j < 0) break;
    }
  }

 private:
  std::size_t cell_of(const Vec& p) const {
    const Vec c = inverse_ * p;
    std::size_t idx = 0;
    for (int j = 0; j < static_cast<int>(k_.size()); ++j) {
      const double frac = c[j] - std::floor(c[j]);
      const int cj = std::min(k_[j] - 1, static_cast<int>(frac * k_[j]));
      idx = idx * static_cast<std::size_t>(k_[j]) + static_cast<std::size_t>(cj);
    }
    return idx;
  }

  Mat inverse_;
  std::vector<int> k_;
  std::vector<double> row_norm_;
  std::vector<std::vector<int>> cells_;
  std::vector<int> all_;
};

// Chart radius covering metric radius r.
double chart_radius(const Manifold& m, double r) { return is_torus(m) ? r / stretch(m).lo * (1.0 + 1e-9) : kInf; }

void require_net_support(const Manifold& m) {
  if (!is_torus(m) && m.kind() != ManifoldKind::sphere) {
    fail(ErrorCode::unsupported_manifold, fmt::format("nets are built on tori and round spheres only, got {}", m.id()));
  }
}

void shuffle(std::vector<Vec>& v, std::uint64_t seed) {
  Rng rng(seed);
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

std::vector<Vec> candidate_points(const Manifold& m, double spacing, std::uint64_t seed) {
  std::vector<Vec> out;
  const int n = m.dim();
  if (is_torus(m)) {
    const Mat& b = m.lattice()->basis();
    const double hi = stretch(m).hi;
    std::array<int, kMaxDim> k{}, at{};
    std::size_t total = 1;
    for (int j = 0; j < n; ++j) {
      k[j] = std::max(1, static_cast<int>(std::ceil(hi * b.col(j).norm() / spacing)));
      total *= static_cast<std::size_t>(k[j]);
    }
    if (total > 20'000'000) fail(ErrorCode::sampling_budget_exceeded, "candidate grid too large for this eps");
    out.reserve(total);
    for (;;) {
      Vec c(n);
      for (int j = 0; j < n; ++j) c[j] = static_cast<double>(at[j]) / k[j];
      out.push_back(b * c);
      int j = n - 1;
      while (j >= 0 && ++at[j] == k[j]) at[j--] = 0;
      if (j < 0) break;
    }
  } else {
    const double R = m.sphere_radius();
    const double vol = 2.0 * std::pow(kPi, 0.5 * (n + 1)) / std::tgamma(0.5 * (n + 1)) * std::pow(R, n);
    const auto count = static_cast<std::size_t>(std::ceil(4.0 * vol / std::pow(spacing, n)));
    if (count > 20'000'000) fail(ErrorCode::sampling_budget_exceeded, "candidate set too large for this eps");
    Rng rng(split_seed(seed, 0x5eed));
    for (std::size_t i = 0; i < count; ++i) out.push_back(m.sample_point(rng));
  }
  shuffle(out, split_seed(seed, 1));
  return out;
}

// True when d_m(x, y) <= r, deciding by the bracket where possible.
bool within(const Manifold& m, const Stretch& st, const Vec& x, const Vec& y, double r) {
  const Bracket b = distance_bracket(m, st, x, y);
  if (b.lo > r) return false;
  if (b.hi <= r) return true;
  return exact_distance(m, x, y) <= r;
}

double min_separation(const Manifold& m, const std::vector<Vec>& net, const NetIndex& index, double eps) {
  const Stretch st = is_torus(m) ? stretch(m) : Stretch{};
  double best = kInf;
  for (int i = 0; i < static_cast<int>(net.size()); ++i) {
    index.near(net[i], chart_radius(m, 2.0 * eps), [&](int j) {
      if (j <= i) return;
      const Bracket b = distance_bracket(m, st, net[i], net[j]);
      if (b.lo >= std::min(best, 2.0 * eps)) return;
      best = std::min(best, b.lo == b.hi ? b.lo : exact_distance(m, net[i], net[j]));
    });
  }
  return best;
}

double sampled_density(const Manifold& m, const std::vector<Vec>& net, const NetIndex& index, double eps,
                       int samples, std::uint64_t seed) {
  const Stretch st = is_torus(m) ? stretch(m) : Stretch{};
  double worst = 0.0;
  Rng rng(seed);
  for (int k = 0; k < samples; ++k) {
    const Vec x = m.sample_point(rng);
    double best = kInf;
    index.near(x, chart_radius(m, 7.0 * eps), [&](int j) { best = std::min(best, distance_bracket(m, st, x, net[j]).hi); });
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

// ---------------------------------------------------------------------------
// Cross distances

double chart_distortion(const Manifold& m, const Manifold& n) {
  if (m.dim() != n.dim()) fail(ErrorCode::unsupported_manifold, "chart identification needs equal dimensions");
  if (is_torus(m) && n.kind() == ManifoldKind::flat_torus) {
    if (!m.lattice()->basis().isApprox(n.lattice()->basis(), 1e-12)) {
      fail(ErrorCode::unsupported_manifold, "chart identification needs the same deck lattice");
    }
    const Stretch st = stretch(m);
    const double s = n.scale();
    const double factor = std::max({st.hi - s, s - st.lo, 0.0});
    return factor * torus_covering_radius(n);
  }
  if (m.kind() == ManifoldKind::sphere && n.kind() == ManifoldKind::sphere) {
    return std::abs(m.sphere_radius() - n.sphere_radius()) * kPi;
  }
  fail(ErrorCode::unsupported_manifold,
       fmt::format("no chart identification between {} and {}", to_string(m.kind()), to_string(n.kind())));
}

CrossDistance identity_chart_distance(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n) {
  CrossDistance c;
  c.name = "identity-chart";
  c.distortion = chart_distortion(*m, *n);
  const double half = 0.5 * c.distortion;
  c.fn = [n, half](const Vec& x, const Vec& y) { return n->model_distance(n->normalize(x), y) + half; };
  return c;
}

CrossDistance graph_distance(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n,
                             double grid_spacing) {
  if (!(grid_spacing > 0.0)) fail(ErrorCode::invalid_argument, "graph-distance grid spacing must be positive");
  require_net_support(*m);
  CrossDistance c;
  c.name = "graph-distance";
  c.distortion = chart_distortion(*m, *n);
  const double half = 0.5 * c.distortion;
  auto grid = std::make_shared<std::vector<Vec>>(candidate_points(*m, grid_spacing, 0));
  c.fn = [m, n, half, grid](const Vec& x, const Vec& y) {
    const Stretch st = is_torus(*m) ? stretch(*m) : Stretch{};
    double best = n->model_distance(n->normalize(x), y);
    for (const Vec& z : *grid) {
      const double dn = n->model_distance(z, y);
      if (dn >= best) continue;
      const Bracket b = distance_bracket(*m, st, x, z);
      if (b.lo + dn >= best) continue;
      const double dm = b.lo == b.hi ? b.lo : exact_distance(*m, x, z);
      best = std::min(best, dm + dn);
    }
    return best + half;
  };
  return c;
}

CrossDistance make_cross_distance(std::string_view name, std::shared_ptr<const Manifold> m,
                                  std::shared_ptr<const Manifold> n, double grid_spacing) {
  if (name == "identity-chart") return identity_chart_distance(std::move(m), std::move(n));
  if (name == "graph-distance") return graph_distance(std::move(m), std::move(n), grid_spacing);
  fail(ErrorCode::invalid_argument,
       fmt::format("unknown cross distance '{}' (expected identity-chart or graph-distance)", name));
}

// ---------------------------------------------------------------------------
// Coupling

GHCoupling build_coupling(std::shared_ptr<const Manifold> m, std::shared_ptr<const Manifold> n, CrossDistance cross,
                          double eps, std::uint64_t seed, const CouplingOptions& opts) {
  if (!(eps > 0.0) || !std::isfinite(eps)) fail(ErrorCode::invalid_argument, "eps must be positive");
  require_net_support(*m);
  require_net_support(*n);
  if (m->dim() != n->dim()) fail(ErrorCode::invalid_argument, "M and N must have the same dimension");

  GHCoupling c;
  c.m = m;
  c.n = n;
  c.cross = std::move(cross);
  c.epsilon = eps;

  const Stretch sm = is_torus(*m) ? stretch(*m) : Stretch{};
  const Stretch sn = is_torus(*n) ? stretch(*n) : Stretch{};
  NetIndex index_m(*m, chart_radius(*m, eps));
  NetIndex index_n(*n, chart_radius(*n, eps));

  for (const Vec& x : candidate_points(*m, 0.5 * eps, seed)) {
    if (!n->in_domain(x)) continue;
    bool blocked = false;
    index_m.near(x, chart_radius(*m, eps), [&](int j) {
      if (!blocked && within(*m, sm, x, c.net_m[j], eps)) blocked = true;
    });
    if (blocked) continue;
    const Vec y = n->normalize(x);
    index_n.near(y, chart_radius(*n, eps), [&](int j) {
      if (!blocked && within(*n, sn, y, c.net_n[j], eps)) blocked = true;
    });
    if (blocked) continue;
    const double gap = c.cross(x, y);
    if (!(gap < eps)) {
      fail(ErrorCode::pairing_failure,
           fmt::format("no partner within eps = {} of net point ({}); cross distance {:.6g} (distortion {:.6g})", eps,
                       fmt::join(x, ", "), gap, c.cross.distortion));
    }
    const int id = static_cast<int>(c.net_m.size());
    c.net_m.push_back(x);
    c.net_n.push_back(y);
    c.pairing.push_back(gap);
    index_m.insert(id, x);
    index_n.insert(id, y);
  }

  auto& r = c.report;
  r.max_pairing = c.pairing.empty() ? 0.0 : *std::max_element(c.pairing.begin(), c.pairing.end());
  r.min_separation_m = min_separation(*m, c.net_m, index_m, eps);
  r.min_separation_n = min_separation(*n, c.net_n, index_n, eps);
  r.density_samples = opts.density_samples;
  r.density_m = sampled_density(*m, c.net_m, index_m, eps, opts.density_samples, split_seed(seed, 2));
  r.density_n = sampled_density(*n, c.net_n, index_n, eps, opts.density_samples, split_seed(seed, 3));
  r.separated = r.min_separation_m > eps && r.min_separation_n > eps;
  r.dense = r.density_m <= 7.0 * eps && r.density_n <= 7.0 * eps;
  return c;
}

// ---------------------------------------------------------------------------
// Bump function

double chi(double t, double sigma) {
  if (t <= 0.5 * sigma) return 1.0;
  if (t >= sigma) return 0.0;
  const double u = (t - 0.5 * sigma) / (0.5 * sigma);
  const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  return 1.0 - s;
}

double chi_derivative(double t, double sigma) {
  if (t <= 0.5 * sigma || t >= sigma) return 0.0;
  const double u = (t - 0.5 * sigma) / (0.5 * sigma);
  return -30.0 * u * u * (1.0 - u) * (1.0 - u) / (0.5 * sigma);
}

double chi_lipschitz(double sigma) { return 15.0 / (4.0 * sigma); }

double SparseVector::at(int i) const {
  const auto it = std::lower_bound(index.begin(), index.end(), i);
  return it != index.end() && *it == i ? value[static_cast<std::size_t>(it - index.begin())] : 0.0;
}

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : value) s += v * v;
  return std::sqrt(s);
}

double distance(const SparseVector& a, const SparseVector& b) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.index.size() || j < b.index.size()) {
    if (j == b.index.size() || (i < a.index.size() && a.index[i] < b.index[j])) {
      s += a.value[i] * a.value[i];
      ++i;
    } else if (i == a.index.size() || b.index[j] < a.index[i]) {
      s += b.value[j] * b.value[j];
      ++j;
    } else {
      const double d = a.value[i] - b.value[j];
      s += d * d;
      ++i;
      ++j;
    }
  }
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Fibration map

struct FibrationMap::Impl {
  struct Sample {
    Vec y;
    double w;
  };

  Impl(GHCoupling c, double s, const FibrationOptions& o)
      : coupling(std::move(c)),
        sigma(s),
        opts(o),
        index_m(*coupling.m, chart_radius(*coupling.m, sigma + coupling.epsilon)),
        index_n(*coupling.n, chart_radius(*coupling.n, sigma)),
        flat_local(coupling.m->kind() == ManifoldKind::flat_torus &&
                   sigma + 2.0 * coupling.epsilon < injectivity_radius(*coupling.m)) {}

  GHCoupling coupling;
  double sigma;
  FibrationOptions opts;
  double limit = kInf;
  double reach = kInf;
  NetIndex index_m;
  NetIndex index_n;
  /// Flat M with every ball and its sigma-neighborhood inside one
  /// injectivity domain: distances are Euclidean in a single lift.
  bool flat_local = false;
  mutable std::vector<std::vector<Sample>> cache;

  const Manifold& M() const { return *coupling.m; }
  const Manifold& N() const { return *coupling.n; }

  std::vector<Sample> draw_ball(int i) const;
  const std::vector<Sample>& ball(int i, std::vector<Sample>& scratch) const;
  SparseVector f_M(const Vec& x, std::vector<Vec>* grads) const;
  double flat_average(int i, const Vec& delta, Vec* grad) const;
  SparseVector f_N(const Vec& y, std::vector<Vec>* jac) const;
  Projection project(const SparseVector& target, const std::optional<Vec>& start) const;
  double estimate_reach() const;
};

std::vector<FibrationMap::Impl::Sample> FibrationMap::Impl::draw_ball(int i) const {
  const Manifold& m = M();
  const double eps = coupling.epsilon;
  const Vec& center = coupling.net_m[static_cast<std::size_t>(i)];
  const int n = m.dim();
  const int q = opts.quadrature_samples;
  const long budget = 64L * q;
  Rng rng(split_seed(opts.seed, static_cast<std::uint64_t>(i)));
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(q));
  long tries = 0;
  if (is_torus(m)) {
    const Stretch st = stretch(m);
    const double hw = eps / st.lo;
    while (static_cast<int>(out.size()) < q) {
      if (++tries > budget) break;
      Vec y(n);
      for (int k = 0; k < n; ++k) y[k] = center[k] + hw * (2.0 * rng.uniform() - 1.0);
      if (!within(m, st, center, y, eps) || (center - y).norm() == 0.0) continue;
      out.push_back({y, std::sqrt(m.metric_at(y).determinant())});
    }
  } else {
    // Geodesic cap on the round sphere: direction uniform in the tangent
    // sphere, radius with density proportional to sin^{n-1}.
    const double R = m.sphere_radius();
    const double rho = eps / R;
    const auto a = m.sphere_embed(center);
    const auto J = m.sphere_jacobian(center);
    const Eigen::MatrixXd Jd = J;
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(Jd);
    const Eigen::MatrixXd E = Eigen::MatrixXd(qr.householderQ()).leftCols(n);
    while (static_cast<int>(out.size()) < q) {
      if (++tries > budget) break;
      const double th = rho * std::pow(rng.uniform(), 1.0 / n);
      if (th == 0.0) continue;
      const Vec u = rng.unit_vector(n);
      if (rng.uniform() > std::pow(std::sin(th) / th, n - 1)) continue;
      Eigen::VectorXd p = std::cos(th) * Eigen::VectorXd(a) + std::sin(th) * (E * Eigen::VectorXd(u));
      p.normalize();
      const Vec y = m.sphere_chart(p);
      if (!m.in_domain(y)) continue;
      out.push_back({y, 1.0});
    }
  }
  if (static_cast<int>(out.size()) < q) {
    fail(ErrorCode::quadrature_failure,
         fmt::format("ball sampling around net point {} accepted {} of {} points in {} tries", i, out.size(), q, tries));
  }
  return out;
}

const std::vector<FibrationMap::Impl::Sample>& FibrationMap::Impl::ball(int i, std::vector<Sample>& scratch) const {
  // Balls are cached only where sampling needs geodesic solves.
  if (M().has_model_distance()) {
    scratch = draw_ball(i);
    return scratch;
  }
  auto& slot = cache[static_cast<std::size_t>(i)];
  if (slot.empty()) slot = draw_ball(i);
  return slot;
}

SparseVector FibrationMap::Impl::f_M(const Vec& x_in, std::vector<Vec>* grads) const {
  const Manifold& m = M();
  const Vec x = m.normalize(x_in);
  m.check_point(x);
  const double eps = coupling.epsilon;
  const int n = m.dim();
  const Stretch st = is_torus(m) ? stretch(m) : Stretch{};
  const bool bracketed = m.kind() == ManifoldKind::conformal_torus;
  Mat G;
  if (grads) G = m.metric_at(x) * m.orthonormal_frame(x);

  std::vector<int> ids;
  index_m.near(x, chart_radius(m, sigma + eps), [&](int j) { ids.push_back(j); });
  std::sort(ids.begin(), ids.end());

  SparseVector out;
  if (grads) grads->clear();
  std::vector<Sample> scratch;
  auto push = [&](int i, double v, const Vec& g) {
    out.index.push_back(i);
    out.value.push_back(v);
    if (grads) grads->push_back(g);
  };
  const Vec zero = Vec::Zero(n);
  for (int i : ids) {
    const Vec& c = coupling.net_m[static_cast<std::size_t>(i)];
    const Bracket b = distance_bracket(m, st, x, c);
    // Every y in B(c, eps) has |d(x, y) - d(x, c)| < eps.
    if (b.lo - eps >= sigma) continue;
    if (b.hi + eps <= 0.5 * sigma) {
      push(i, 1.0, zero);
      continue;
    }
    if (flat_local) {
      Vec grad = Vec::Zero(n);
      const double avg = flat_average(i, m.lattice()->closest_difference(x - c), grads ? &grad : nullptr);
      const double v = chi(avg, sigma);
      if (v == 0.0) continue;
      push(i, v, Vec(chi_derivative(avg, sigma) * grad));
      continue;
    }
    const auto& samples = ball(i, scratch);
    double wsum = 0.0;
    for (const auto& s : samples) wsum += s.w;
    if (bracketed) {
      double lo = 0.0, hi = 0.0;
      for (const auto& s : samples) {
        const Bracket bs = distance_bracket(m, st, x, s.y);
        lo += s.w * bs.lo;
        hi += s.w * bs.hi;
      }
      if (lo / wsum >= sigma) continue;
      if (hi / wsum <= 0.5 * sigma) {
        push(i, 1.0, zero);
        continue;
      }
    }
    double avg = 0.0;
    Vec grad = Vec::Zero(n);
    for (const auto& s : samples) {
      if (grads) {
        const DistanceResult r = distance_with_direction(m, x, s.y);
        avg += s.w * r.length;
        if (r.length > 1e-12) grad -= s.w * (r.direction.transpose() * G).transpose();
      } else {
        avg += s.w * exact_distance(m, x, s.y);
      }
    }
    avg /= wsum;
    const double v = chi(avg, sigma);
    if (v == 0.0) continue;
    push(i, v, Vec(chi_derivative(avg, sigma) * grad / wsum));
  }
  return out;
}

// Same sampling law as draw_ball on a flat torus (uniform in the ball, box
// rejection) without materializing the samples. delta = x - c in the chart.
double FibrationMap::Impl::flat_average(int i, const Vec& delta, Vec* grad) const {
  const Manifold& m = M();
  const double eps = coupling.epsilon;
  const double scale = m.scale();
  const double hw = eps / scale;
  const int n = m.dim();
  const int q = opts.quadrature_samples;
  const long budget = 64L * q;
  Rng rng(split_seed(opts.seed, static_cast<std::uint64_t>(i)));
  // Plain arrays: this loop dominates the cost of f_M.
  std::array<double, kMaxDim> d{}, u{}, g{};
  for (int k = 0; k < n; ++k) d[k] = delta[k];
  double sum = 0.0;
  int accepted = 0;
  long tries = 0;
  while (accepted < q) {
    if (++tries > budget) {
      fail(ErrorCode::quadrature_failure,
           fmt::format("ball sampling around net point {} accepted {} of {} points in {} tries", i, accepted, q, tries));
    }
    double un2 = 0.0;
    for (int k = 0; k < n; ++k) {
      u[k] = hw * (2.0 * rng.uniform() - 1.0);
      un2 += u[k] * u[k];
    }
    if (scale * std::sqrt(un2) > eps || un2 == 0.0) continue;
    double rn2 = 0.0;
    for (int k = 0; k < n; ++k) rn2 += (d[k] - u[k]) * (d[k] - u[k]);
    const double rn = std::sqrt(rn2);
    sum += scale * rn;
    if (grad && rn > 1e-12) {
      for (int k = 0; k < n; ++k) g[k] += (d[k] - u[k]) / rn;
    }
    ++accepted;
  }
  if (grad) {
    for (int k = 0; k < n; ++k) (*grad)[k] = g[k];
  }
  if (grad) *grad /= q;
  return sum / q;
}

SparseVector FibrationMap::Impl::f_N(const Vec& y, std::vector<Vec>* jac) const {
  const Manifold& nm = N();
  SparseVector out;
  if (jac) jac->clear();
  std::vector<int> ids;
  index_n.near(y, chart_radius(nm, sigma), [&](int j) { ids.push_back(j); });
  std::sort(ids.begin(), ids.end());
  const bool torus = nm.kind() == ManifoldKind::flat_torus;
  for (int i : ids) {
    const Vec& c = coupling.net_n[static_cast<std::size_t>(i)];
    double d = 0.0;
    Vec grad;
    if (torus) {
      const Vec delta = nm.lattice()->closest_difference(y - c);
      const double r = delta.norm();
      d = nm.scale() * r;
      if (d >= sigma) continue;
      if (jac) grad = r > 0.0 ? Vec(nm.scale() * delta / r) : Vec(Vec::Zero(y.size()));
    } else {
      d = nm.model_distance(y, c);
      if (d >= sigma) continue;
      if (jac) {
        const double R = nm.sphere_radius();
        const double sn = std::sin(d / R);
        const auto b = nm.sphere_embed(c);
        const auto J = nm.sphere_jacobian(y);
        grad = sn > 0.0 ? Vec(-R / sn * (J.transpose() * b)) : Vec(Vec::Zero(y.size()));
      }
    }
    out.index.push_back(i);
    out.value.push_back(chi(d, sigma));
    if (jac) jac->push_back(Vec(chi_derivative(d, sigma) * grad));
  }
  return out;
}

Projection FibrationMap::Impl::project(const SparseVector& target, const std::optional<Vec>& start) const {
  const Manifold& nm = N();
  const int n = nm.dim();
  Projection out;
  if (start) {
    out.point = nm.normalize(*start);
    out.start_index = -1;
  } else {
    int best = 0;
    double best_v = -1.0;
    for (std::size_t k = 0; k < target.index.size(); ++k) {
      if (target.value[k] > best_v) {
        best_v = target.value[k];
        best = target.index[k];
      }
    }
    out.start_index = best;
    out.point = coupling.net_n[static_cast<std::size_t>(best)];
  }

  struct Eval {
    double cost = 0.0;
    Mat A;
    Vec g;
  };
  auto evaluate = [&](const Vec& y) {
    Eval e;
    std::vector<Vec> jac;
    const SparseVector f = f_N(y, &jac);
    e.A = Mat::Zero(n, n);
    e.g = Vec::Zero(n);
    std::size_t i = 0, j = 0;
    while (i < f.index.size() || j < target.index.size()) {
      if (j == target.index.size() || (i < f.index.size() && f.index[i] < target.index[j])) {
        const double r = f.value[i];
        e.cost += r * r;
        e.A += jac[i] * jac[i].transpose();
        e.g += r * jac[i];
        ++i;
      } else if (i == f.index.size() || target.index[j] < f.index[i]) {
        e.cost += target.value[j] * target.value[j];
        ++j;
      } else {
        const double r = f.value[i] - target.value[j];
        e.cost += r * r;
        e.A += jac[i] * jac[i].transpose();
        e.g += r * jac[i];
        ++i;
        ++j;
      }
    }
    return e;
  };

  Eval cur = evaluate(out.point);
  double lambda = 1e-6;
  bool converged = false;
  int it = 0;
  for (; it < opts.max_iterations && !converged; ++it) {
    bool accepted = false;
    while (lambda < 1e12) {
      Mat H = cur.A;
      for (int k = 0; k < n; ++k) H(k, k) += lambda * cur.A(k, k) + 1e-15;
      const Vec step = -H.ldlt().solve(cur.g);
      Vec y_try = out.point + step;
      if (!nm.in_domain(y_try)) {
        lambda *= 10.0;
        continue;
      }
      y_try = nm.normalize(y_try);
      const Eval trial = evaluate(y_try);
      if (trial.cost <= cur.cost) {
        out.point = y_try;
        cur = trial;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        if (step.norm() <= 1e-12 * std::max(1.0, out.point.norm())) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    // No decrease is possible at any damping: stationary to rounding.
    if (!accepted) converged = true;
  }
  out.iterations = it;
  out.residual = std::sqrt(cur.cost);
  const auto ldlt = cur.A.ldlt();
  out.tangential_residual = ldlt.info() == Eigen::Success ? std::sqrt(std::max(0.0, cur.g.dot(ldlt.solve(cur.g)))) : kInf;
  if (!converged && !(out.tangential_residual <= 1e-8)) {
    fail(ErrorCode::optimizer_divergence,
         fmt::format("projection did not converge in {} iterations (tangential residual {:.3g})", it,
                     out.tangential_residual));
  }
  return out;
}

double FibrationMap::Impl::estimate_reach() const {
  // Federer: reach = inf over a != b of |b - a|^2 / (2 dist(b - a, T_a)).
  const Manifold& nm = N();
  const int n = nm.dim();
  std::vector<Vec> probes;
  if (nm.kind() == ManifoldKind::flat_torus) {
    const int k = opts.reach_probes;
    std::array<int, kMaxDim> at{};
    for (;;) {
      Vec c(n);
      for (int j = 0; j < n; ++j) c[j] = (at[j] + 0.5) / k;
      probes.push_back(nm.lattice()->basis() * c);
      int j = n - 1;
      while (j >= 0 && ++at[j] == k) at[j--] = 0;
      if (j < 0) break;
    }
  } else {
    Rng rng(split_seed(opts.seed, 0x7eac));
    const int count = static_cast<int>(std::pow(opts.reach_probes, n));
    for (int i = 0; i < count; ++i) probes.push_back(nm.sample_point(rng));
  }
  std::vector<Vec> points = probes;
  const double h = sigma / 16.0;
  for (const Vec& p : probes) {
    const Mat E = nm.orthonormal_frame(p);
    for (int j = 0; j < n; ++j) {
      const Vec q = p + h * E.col(j);
      if (nm.in_domain(q)) points.push_back(nm.normalize(q));
    }
  }
  std::vector<SparseVector> images;
  std::vector<double> norms2;
  images.reserve(points.size());
  for (const Vec& p : points) {
    images.push_back(f_N(p, nullptr));
    norms2.push_back(images.back().norm() * images.back().norm());
  }

  double best = kInf;
  for (std::size_t a = 0; a < probes.size(); ++a) {
    std::vector<Vec> jac;
    const SparseVector fa = f_N(probes[a], &jac);
    Mat gram = Mat::Zero(n, n);
    for (const Vec& r : jac) gram += r * r.transpose();
    const auto ldlt = gram.ldlt();
    // Images of points at least 2 sigma apart have disjoint supports, so
    // fb - fa projects onto T_a as -fa does.
    Vec t0 = Vec::Zero(n);
    for (std::size_t k = 0; k < fa.index.size(); ++k) t0 -= fa.value[k] * jac[k];
    const double along0 = t0.dot(ldlt.solve(t0));
    const double na2 = norms2[a];
    for (std::size_t b = 0; b < points.size(); ++b) {
      if (b == a) continue;
      double len2 = 0.0;
      double along = 0.0;
      if (nm.model_distance(probes[a], points[b]) >= 2.0 * sigma) {
        len2 = na2 + norms2[b];
        along = along0;
      } else {
        const SparseVector& fb = images[b];
        const double len = distance(fa, fb);
        len2 = len * len;
        Vec tb = Vec::Zero(n);
        std::size_t j = 0;
        for (std::size_t k = 0; k < fa.index.size(); ++k) {
          while (j < fb.index.size() && fb.index[j] < fa.index[k]) ++j;
          const double vb = j < fb.index.size() && fb.index[j] == fa.index[k] ? fb.value[j] : 0.0;
          tb += (vb - fa.value[k]) * jac[k];
        }
        along = tb.dot(ldlt.solve(tb));
      }
      if (len2 == 0.0) continue;
      const double perp2 = len2 - along;
      if (perp2 <= 1e-24 * len2) continue;
      best = std::min(best, len2 / (2.0 * std::sqrt(perp2)));
    }
  }
  return best;
}

FibrationMap::FibrationMap(GHCoupling coupling, double sigma, const FibrationOptions& opts) {
  if (!coupling.m || !coupling.n) fail(ErrorCode::invalid_argument, "coupling has no manifolds");
  if (!(sigma > 0.0)) fail(ErrorCode::invalid_argument, "sigma must be positive");
  if (opts.quadrature_samples < 1) fail(ErrorCode::invalid_argument, "quadrature_samples must be >= 1");
  if (coupling.net_m.empty()) fail(ErrorCode::invalid_argument, "coupling has empty nets");
  const Manifold& nm = *coupling.n;
  const double inj = injectivity_radius(nm);
  if (!is_torus(*coupling.m) && coupling.m->kind() != ManifoldKind::sphere) {
    fail(ErrorCode::unsupported_manifold, fmt::format("f_M needs M to be a torus or a sphere, got {}", coupling.m->id()));
  }
  double limit = inj;
  if (opts.r0) limit = std::min(limit, *opts.r0);
  if (opts.rac) limit = std::min(limit, *opts.rac);
  limit *= 0.25;
  if (!(sigma < limit)) {
    fail(ErrorCode::precondition_violated, fmt::format("sigma = {} must be below R = {:.6g}", sigma, limit));
  }
  impl_ = std::make_unique<Impl>(std::move(coupling), sigma, opts);
  impl_->limit = limit;
  const auto S = impl_->coupling.net_m.size();
  for (std::size_t i = 0; i < S; ++i) {
    impl_->index_m.insert(static_cast<int>(i), impl_->coupling.net_m[i]);
    impl_->index_n.insert(static_cast<int>(i), impl_->coupling.net_n[i]);
  }
  impl_->cache.resize(S);
  impl_->reach = impl_->estimate_reach();
}

FibrationMap::~FibrationMap() = default;
FibrationMap::FibrationMap(FibrationMap&&) noexcept = default;
FibrationMap& FibrationMap::operator=(FibrationMap&&) noexcept = default;

const GHCoupling& FibrationMap::coupling() const { return impl_->coupling; }
double FibrationMap::sigma() const { return impl_->sigma; }
int FibrationMap::size() const { return static_cast<int>(impl_->coupling.net_m.size()); }
double FibrationMap::radius_limit() const { return impl_->limit; }
double FibrationMap::reach() const { return impl_->reach; }

SparseVector FibrationMap::f_M(const Vec& x, std::vector<Vec>* gradients) const { return impl_->f_M(x, gradients); }
SparseVector FibrationMap::f_N(const Vec& y, std::vector<Vec>* jacobian) const { return impl_->f_N(y, jacobian); }
Projection FibrationMap::project(const SparseVector& target, const std::optional<Vec>& start) const {
  return impl_->project(target, start);
}

MapEvaluation evaluate_maps(const FibrationMap& fm, const Vec& x) {
  MapEvaluation e;
  e.f_m = fm.f_M(x);
  double best = -1.0;
  for (std::size_t k = 0; k < e.f_m.index.size(); ++k) {
    if (e.f_m.value[k] > best) {
      best = e.f_m.value[k];
      e.start_index = e.f_m.index[k];
    }
  }
  return e;
}

namespace {

FibrationPoint finish(const FibrationMap& fm, const Vec& x, const Projection& p) {
  if (p.residual > fm.reach()) {
    fail(ErrorCode::outside_reach,
         fmt::format("f_M(x) is {:.6g} from the image, beyond the reach estimate {:.6g}", p.residual, fm.reach()));
  }
  FibrationPoint out;
  out.x = x;
  out.image = p.point;
  out.displacement = fm.coupling().cross(x, p.point);
  out.residual = p.residual;
  out.tangential_residual = p.tangential_residual;
  out.iterations = p.iterations;
  return out;
}

}  // namespace

FibrationPoint fibration_map(const FibrationMap& fm, const Vec& x) {
  const Vec xn = fm.coupling().m->normalize(x);
  return finish(fm, xn, fm.project(fm.f_M(xn)));
}

SubmersionReport check_submersion(const FibrationMap& fm, const Vec& x_in, double fd_step, SubmersionMode mode) {
  if (!(fd_step > 0.0)) fail(ErrorCode::invalid_argument, "fd_step must be positive");
  const Manifold& m = *fm.coupling().m;
  const Manifold& nm = *fm.coupling().n;
  const Vec x = m.normalize(x_in);
  const int dm = m.dim();
  const int dn = nm.dim();
  SubmersionReport rep;
  rep.x = x;

  std::vector<Vec> grads;
  const SparseVector F = fm.f_M(x, mode == SubmersionMode::chain_rule ? &grads : nullptr);
  const FibrationPoint base = finish(fm, x, fm.project(F));
  rep.point = base;
  const Mat Em = m.orthonormal_frame(x);
  const Mat En = nm.orthonormal_frame(base.image);
  const auto En_inv = En.partialPivLu();

  rep.differential = Mat::Zero(dn, dm);
  for (int k = 0; k < dm; ++k) {
    Vec plus, minus;
    if (mode == SubmersionMode::finite_difference) {
      plus = fibration_map(fm, x + fd_step * Em.col(k)).image;
      minus = fibration_map(fm, x - fd_step * Em.col(k)).image;
    } else {
      SparseVector Fp = F, Fm = F;
      for (std::size_t i = 0; i < F.value.size(); ++i) {
        Fp.value[i] += fd_step * grads[i][k];
        Fm.value[i] -= fd_step * grads[i][k];
      }
      plus = fm.project(Fp, base.image).point;
      minus = fm.project(Fm, base.image).point;
    }
    const Vec col = nm.chart_delta(minus, plus) / (2.0 * fd_step);
    rep.differential.col(k) = En_inv.solve(col);
  }
  const Eigen::JacobiSVD<Mat> svd(rep.differential);
  rep.singular_values = svd.singularValues();
  rep.min_singular_value = rep.singular_values.minCoeff();
  return rep;
}

AngleTransfer angle_transfer_report(const GHCoupling& coupling, const GeodesicSegment& c1, const GeodesicSegment& c2,
                                    const GeodesicSegment& c1p, const GeodesicSegment& c2p, double mu, double nu) {
  const Manifold& m = *coupling.m;
  const Manifold& nm = *coupling.n;
  if (!(mu > 0.0 && mu <= 1.0)) fail(ErrorCode::invalid_argument, "mu must lie in (0, 1]");
  if (!(nu >= 0.0)) fail(ErrorCode::invalid_argument, "nu must be nonnegative");
  if (m.chart_delta(c1.start, c2.start).norm() > 1e-12 || nm.chart_delta(c1p.start, c2p.start).norm() > 1e-12) {
    fail(ErrorCode::hypothesis_violated, "the two geodesics on each side must share their start point");
  }
  const std::array<const GeodesicSegment*, 2> a{&c1, &c2};
  const std::array<const GeodesicSegment*, 2> b{&c1p, &c2p};
  GeodesicOptions go;
  go.with_samples = false;
  AngleTransfer out;
  out.mu = mu;
  for (int i = 0; i < 2; ++i) {
    const Vec ua = a[i]->direction / m.norm(a[i]->start, a[i]->direction);
    const Vec ub = b[i]->direction / nm.norm(b[i]->start, b[i]->direction);
    const Vec end_a = exp_map(m, a[i]->start, a[i]->length * ua, go);
    const Vec end_b = exp_map(nm, b[i]->start, a[i]->length * ub, go);
    out.start_gap[i] = coupling.cross(a[i]->start, b[i]->start);
    out.end_gap[i] = coupling.cross(end_a, end_b);
    // nu = 0 is read as exact coincidence.
    const double slack = 1e-12;
    if (out.start_gap[i] > nu + slack || out.end_gap[i] > nu + slack) {
      fail(ErrorCode::hypothesis_violated,
           fmt::format("geodesic {}: endpoint gaps {:.6g}, {:.6g} exceed nu = {}", i + 1, out.start_gap[i],
                       out.end_gap[i], nu));
    }
  }
  out.theta = m.angle(c1.start, c1.direction, c2.direction);
  out.theta_prime = nm.angle(c1p.start, c1p.direction, c2p.direction);
  out.defect = std::abs(out.theta - mu * out.theta_prime) - (1.0 - mu) * kPi;
  return out;
}

std::string fibration_csv_header() { return "x,f_x,displacement,residual,min_singular_value"; }

std::string fibration_csv_row(const FibrationPoint& p, double min_singular_value) {
  return fmt::format("\"{:.10g}\",\"{:.10g}\",{:.12g},{:.12g},{:.12g}", fmt::join(p.x, " "), fmt::join(p.image, " "),
                     p.displacement, p.residual, min_singular_value);
}

}  // namespace riccilab
