// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Tolerances are fixed here and printed with each result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "riccilab/bounds.hpp"
#include "riccilab/comparison.hpp"
#include "riccilab/critical.hpp"
#include "riccilab/error.hpp"
#include "riccilab/excess.hpp"
#include "riccilab/fibration.hpp"
#include "riccilab/harness.hpp"
#include "riccilab/pi1_basis.hpp"

using namespace riccilab;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kMu = 18.0 / 19.0;

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failures; the first few messages end up in the detail string.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : ", ") + s; }
  Outcome done() const {
    Outcome o;
    o.pass = failures_ == 0;
    o.detail = notes_;
    if (!o.pass) o.detail += (notes_.empty() ? "" : "; ") + std::to_string(failures_) + " failure(s): " + messages_;
    return o;
  }

 private:
  int failures_ = 0;
  std::string messages_;
  std::string notes_;
};

std::string num(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  return buf;
}

Vec origin(int n) { return Vec::Zero(n); }

// The Euclidean comparison angle opposite side i of a measured triangle.
double euclidean_angle(const GeodesicTriangle& t, int i) {
  return comparison_angle(0.0, t.lengths[(i + 1) % 3], t.lengths[(i + 2) % 3], t.lengths[i]);
}

double model_angle(double H, const GeodesicTriangle& t, int i) {
  return comparison_angle(H, t.lengths[(i + 1) % 3], t.lengths[(i + 2) % 3], t.lengths[i]);
}

// 1. Euclidean equality.
Outcome euclidean_equality() {
  Check c;
  double worst = 0.0, min_margin = std::numeric_limits<double>::infinity();
  for (int n : {2, 3}) {
    const auto m = Manifold::euclidean(n);
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto t = random_triangle(m, origin(n), 1.0, split_seed(n, k));
      for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(t.angles[i] - euclidean_angle(t, i)));
      const auto rep = check_toponogov(t, kMu);
      c.expect(rep.pass, "toponogov predicate failed on euclidean(" + std::to_string(n) + ") triangle " +
                             std::to_string(k));
      for (double r : rep.ratios) min_margin = std::min(min_margin, r - kMu);
    }
  }
  c.expect(worst <= 1e-6, "angle deviation " + num(worst));
  // The margin is exactly 1/19 up to roundoff in the ratio alpha / alpha-bar.
  c.expect(min_margin >= 1.0 / 19.0 - 1e-12, "ratio margin " + num(min_margin, 17));
  c.note("max |alpha - alpha_bar| = " + num(worst) + " (tol 1e-6)");
  c.note("min ratio margin = " + num(min_margin, 12) + " (need 1/19)");
  return c.done();
}

// 2. Toponogov on the unit sphere, closed form and ODE shooting.
Outcome sphere_toponogov() {
  Check c;
  const auto m = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({kPi / 2, 0.0});
  for (auto backend : {GeodesicBackend::closed_form, GeodesicBackend::shooting}) {
    const bool ode = backend == GeodesicBackend::shooting;
    const double tol = ode ? 1e-3 : 1e-4;
    GeodesicOptions go;
    go.backend = backend;
    go.with_samples = false;
    double worst_deficit = -std::numeric_limits<double>::infinity(), worst_model = 0.0, longest = 0.0;
    int predicate_failures = 0;
    for (std::uint64_t k = 0; k < 200; ++k) {
      const auto t = random_triangle(m, p, 0.5, split_seed(2, k), go);
      for (int i = 0; i < 3; ++i) {
        longest = std::max(longest, t.lengths[i]);
        worst_deficit = std::max(worst_deficit, euclidean_angle(t, i) - t.angles[i]);
        worst_model = std::max(worst_model, std::abs(t.angles[i] - model_angle(1.0, t, i)));
      }
      if (!check_toponogov(t, kMu).pass) ++predicate_failures;
    }
    const std::string tag = ode ? "ode" : "closed-form";
    c.expect(longest <= 1.0, tag + ": side longer than 1");
    c.expect(worst_deficit <= tol, tag + ": alpha below alpha_bar by " + num(worst_deficit));
    c.expect(worst_model <= tol, tag + ": deviation from the K=1 model angle " + num(worst_model));
    c.expect(predicate_failures == 0, tag + ": " + std::to_string(predicate_failures) + " predicate failures");
    c.note(tag + ": max(alpha_bar - alpha) = " + num(worst_deficit) + ", max |alpha - model angle| = " +
           num(worst_model) + " (tol " + num(tol) + ")");
  }
  return c.done();
}

// 3. Conjugate radius.
Outcome conjugate_radius() {
  Check c;
  int redraws = 0;
  // Random point and unit direction; geodesics that run into a pole band of
  // the chart are redrawn.
  auto times = [&](const Manifold& m, int samples, std::uint64_t seed) {
    std::vector<std::optional<double>> out;
    Rng rng(seed);
    while (static_cast<int>(out.size()) < samples) {
      const Vec p = m.sample_point(rng);
      const Vec v = m.orthonormal_frame(p) * rng.unit_vector(m.dim());
      try {
        out.push_back(first_conjugate_time(m, p, v, 10.0).first_conjugate_time);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::left_chart_domain || ++redraws > 100) throw;
      }
    }
    return out;
  };
  for (const auto& [K, expect, tol] : {std::tuple{1.0, kPi, 1e-3}, std::tuple{4.0, kPi / 2, 1e-2}}) {
    double worst = 0.0;
    for (const auto& t : times(Manifold::sphere(2, K), 16, 3)) {
      c.expect(t.has_value(), "no conjugate point on sphere K=" + num(K));
      if (t) worst = std::max(worst, std::abs(*t - expect));
    }
    c.expect(worst <= tol, "sphere K=" + num(K) + " error " + num(worst));
    c.note("sphere K=" + num(K) + " max error " + num(worst) + " (tol " + num(tol) + ")");
  }
  for (const std::string id : {"euclidean:n=2", "torus:basis=[[1,0],[0,1]]", "hyperbolic:n=2,K=-1"}) {
    int found = 0;
    for (const auto& t : times(Manifold::parse(id), 16, 5)) found += t.has_value();
    c.expect(found == 0, id + ": conjugate point found before horizon 10");
  }
  c.note("none up to horizon 10 on euclidean, flat torus, hyperbolic; " + std::to_string(redraws) + " redraws");
  return c.done();
}

// 4. Scale equivariance of the angle comparison radius.
Outcome rac_equivariance() {
  Check c;
  const auto h = Manifold::hyperbolic(2, -1.0);
  const Vec p = origin(2);
  for (auto backend : {GeodesicBackend::automatic, GeodesicBackend::shooting}) {
    RacOptions ro;
    ro.geodesic.backend = backend;
    const double base = estimate_rac(h, p, kMu, 4.0, 40, 11, ro);
    c.expect(base > 0.0 && base < 4.0, "base radius " + num(base) + " not strictly inside (0, r_max)");
    std::string line = (backend == GeodesicBackend::shooting ? "shooting" : "closed-form") +
                       std::string(" rac = ") + num(base);
    for (double s : {2.0, 5.0}) {
      const double scaled = estimate_rac(h.scaled(s), p, kMu, 4.0 * s, 40, 11, ro);
      const double rel = std::abs(scaled / (s * base) - 1.0);
      c.expect(rel <= 0.10, "c=" + num(s) + " relative error " + num(rel));
      line += ", c=" + num(s) + ": " + num(scaled);
    }
    c.note(line);
  }
  return c.done();
}

// 5. Angle bound at the critical-point threshold and beyond.
Outcome cpe_formula() {
  Check c;
  const double at_threshold = cpe_angle_lower_bound(1.1909542445060599251);
  c.expect(std::abs(cpe_threshold() - 1.1909542445060599251) <= 1e-14, "threshold " + num(cpe_threshold(), 17));
  c.expect(at_threshold <= 1e-9, "value at threshold " + num(at_threshold));
  double prev = cpe_angle_lower_bound(1.2);
  int non_monotone = 0;
  for (int k = 1; k <= 10000; ++k) {
    const double nu = 1.2 + (100.0 - 1.2) * k / 10000.0;
    const double cur = cpe_angle_lower_bound(nu);
    if (!(cur > prev)) ++non_monotone;
    prev = cur;
  }
  c.expect(non_monotone == 0, std::to_string(non_monotone) + " non-increasing steps");
  const double limit = cpe_angle_lower_bound(1e30);
  c.expect(std::abs(limit - 17 * kPi / 38) <= 1e-12, "limit " + num(limit, 17));
  c.note("bound(threshold) = " + num(at_threshold) + ", monotone on 10^4 grid points of [1.2, 100]");
  c.note("|bound(1e30) - 17pi/38| = " + num(std::abs(limit - 17 * kPi / 38)));
  return c.done();
}

// 6. Cap packing count.
Outcome packing_consistency() {
  Check c;
  const double theta = 6 * kPi / 19;
  const double two = packing_count(2, theta);
  c.expect(std::abs(two - 19.0 / 3.0) <= 1e-12, "n=2 gives " + num(two, 17));
  for (int n = 2; n <= 6; ++n) {
    const double s = packing_count(n, theta);
    const double cap = std::pow(19.0 / 3.0, n - 1);
    c.expect(s <= cap * (1 + 1e-12), "n=" + std::to_string(n) + ": " + num(s) + " > " + num(cap));
  }
  c.note("|s(2) - 19/3| = " + num(std::abs(two - 19.0 / 3.0)) + ", s(n) <= (19/3)^(n-1) for n = 2..6");
  return c.done();
}

// 7. Critical points of distance functions.
Outcome criticality() {
  Check c;
  const auto s = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({kPi / 2, 0.0});
  const auto anti = is_critical(s, p, make_vec({kPi / 2, kPi}));
  c.expect(anti.is_critical && anti.hull_margin >= -1e-3, "antipode margin " + num(anti.hull_margin));
  const auto quarter = is_critical(s, p, make_vec({kPi / 2, kPi / 2}));
  c.expect(!quarter.is_critical, "point at distance pi/2 reported critical");
  c.note("antipode margin " + num(anti.hull_margin) + ", quarter-turn margin " + num(quarter.hull_margin));

  // Lattice oracle: directions from q to the nearest lifts p + w.
  const auto t = Manifold::parse("torus:basis=[[1,0],[0,1]]");
  const Vec tp = make_vec({0.0, 0.0});
  const Vec tq = make_vec({0.5, 0.5});
  const auto rep = is_critical(t, tp, tq);
  std::vector<Vec> oracle;
  for (const auto& w : DeckLattice::integer(2).closest_translates(tq - tp, 1e-9)) {
    const Vec d = tp + w.vector - tq;
    oracle.push_back(d / d.norm());
  }
  c.expect(oracle.size() == 4, "oracle has " + std::to_string(oracle.size()) + " directions");
  c.expect(rep.directions.size() == oracle.size(), "found " + std::to_string(rep.directions.size()) + " directions");
  for (const auto& d : rep.directions) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : oracle) best = std::min(best, (d - o).norm());
    c.expect(best <= 1e-6, "direction off the lattice oracle by " + num(best));
  }
  const double oracle_margin = hull_margin(oracle);
  c.expect(rep.is_critical && std::abs(rep.hull_margin - oracle_margin) <= 1e-6,
           "torus margin " + num(rep.hull_margin) + " vs oracle " + num(oracle_margin));
  c.note("torus: " + std::to_string(rep.directions.size()) + " directions, margin " + num(rep.hull_margin));
  return c.done();
}

// 8. Greedy covers on the flat unit torus against the covering number.
Outcome covering_soundness() {
  Check c;
  const DeckLattice z2 = DeckLattice::integer(2);
  Rng rng(8);
  double worst_ratio = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double r = rng.uniform(0.05, 0.45);
    const double eps = rng.uniform(0.03, std::min(0.2, r));
    const double h = eps / 4;
    const int steps = static_cast<int>(std::ceil(r / h));
    const Vec center = make_vec({rng.uniform(), rng.uniform()});
    std::vector<Vec> pts;
    for (int i = -steps; i <= steps; ++i)
      for (int j = -steps; j <= steps; ++j) {
        const Vec off = make_vec({i * h, j * h});
        if (z2.closest_difference(off).norm() <= r) pts.push_back(center + off);
      }
    std::vector<Vec> centers;
    for (const Vec& x : pts) {
      bool covered = false;
      for (const Vec& y : centers) {
        if (z2.closest_difference(x - y).norm() <= eps) {
          covered = true;
          break;
        }
      }
      if (!covered) centers.push_back(x);
    }
    const double n1 = covering_number(2, 0.0, r, eps).N1;
    worst_ratio = std::max(worst_ratio, centers.size() / n1);
    c.expect(static_cast<double>(centers.size()) <= n1,
             "r=" + num(r) + " eps=" + num(eps) + ": " + std::to_string(centers.size()) + " > N1=" + num(n1));
  }
  c.note("20 (r, eps) pairs, max greedy/N1 = " + num(worst_ratio, 4));
  return c.done();
}

// 9. Betti-number calculator.
Outcome betti_calculator() {
  Check c;
  // Hand unroll for n=2, H=0, r0=1, D=1, rac=0.4: r_k = 2/10^k, eps_k = r_k/1000,
  // N1 = 2001^2, N2 = 25, rank 22; the base case opens at level 2.
  const auto tr = betti_bound({2, 0.0, 1.0, 1.0, 0.4});
  const double factor = std::log2(3.0) + 4004001.0;
  c.expect(tr.rank == 22, "rank " + std::to_string(tr.rank));
  for (const auto& lv : tr.levels) {
    c.expect(lv.N1 == 4004001.0 && lv.N2 == 25.0, "level " + std::to_string(lv.level) + " covering numbers");
    c.expect(std::abs(lv.r - 2.0 / std::pow(10.0, lv.level)) <= 1e-15, "level radius");
    c.expect(std::abs(lv.log2_factor - factor) <= 1e-6, "level factor");
    c.expect(lv.log2_bound.has_value() == (lv.level >= 2), "base case admissibility at level " +
                                                               std::to_string(lv.level));
    if (lv.log2_bound) {
      const double hand = lv.level * factor + 22 * factor;
      c.expect(std::abs(*lv.log2_bound - hand) <= 1e-6, "level " + std::to_string(lv.level) + " bound");
    }
  }
  c.expect(tr.levels.size() > 3 && std::abs(*tr.levels[2].log2_bound - 96096062.039100017308) <= 1e-6 &&
               std::abs(*tr.levels[3].log2_bound - 100100064.62406251803) <= 1e-6,
           "frozen level values");
  c.expect(tr.chosen_level == 2 && std::abs(tr.value.log2 - 96096062.039100017308) <= 1e-6, "chosen value");

  // Monotone: non-decreasing in D, non-increasing in H, r0 and rac.
  const BoundInputs base{3, -0.5, 1.0, 2.0, 0.5};
  const double v0 = betti_bound(base).value.log2;
  int violations = 0;
  for (double f : {1.2, 2.0, 5.0}) {
    BoundInputs in = base;
    in.D *= f;
    violations += betti_bound(in).value.log2 < v0;
    in = base;
    in.H -= f;
    violations += betti_bound(in).value.log2 < v0;
    in = base;
    in.r0 *= f;
    violations += betti_bound(in).value.log2 > v0;
    in = base;
    in.rac *= f;
    violations += betti_bound(in).value.log2 > v0;
  }
  c.expect(violations == 0, std::to_string(violations) + " monotonicity violations");
  const auto sphere = betti_bound({2, 1.0, kPi, kPi, 1.0});
  c.expect(sphere.value.log2 >= 1.0, "round-sphere bound below 2");
  c.note("chosen level 2, log2 bound " + num(tr.value.log2, 17));
  c.note("round-sphere log2 bound " + num(sphere.value.log2, 6) + " >= 1");
  return c.done();
}

double angle_between(const Vec& a, const Vec& b) {
  return std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
}

// 10. Short basis.
Outcome short_basis_criterion() {
  Check c;
  const auto z2 = short_basis(DeckLattice::integer(2));
  c.expect(z2.elements.size() == 2 && z2.elements[0].length == 1.0 && z2.elements[1].length == 1.0, "Z^2 lengths");
  Mat b = Mat::Zero(2, 2);
  b(0, 0) = 1.0;
  b(1, 1) = 10.0;
  const DeckLattice long_torus(b);
  const auto lt = short_basis(long_torus);
  // Enumeration: the shortest vector, then the shortest one independent of it.
  const auto all = long_torus.vectors_within(10.0 + 1e-9);
  const LatticeVector& first = all.front();
  double second = std::numeric_limits<double>::infinity();
  for (const auto& v : all) {
    if (std::abs(first.vector[0] * v.vector[1] - first.vector[1] * v.vector[0]) > 1e-12) {
      second = std::min(second, v.length);
    }
  }
  c.expect(lt.elements.size() == 2 && lt.elements[0].length == first.length && lt.elements[1].length == second &&
               second == 10.0,
           "long torus lengths");

  Rng rng(10);
  int tested = 0, max_2d = 0;
  double min_angle = kPi;
  while (tested < 100) {
    const int n = tested < 50 ? 2 : 3;
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
    if (std::abs(m.determinant()) < 0.05) continue;
    ++tested;
    const auto sb = short_basis(DeckLattice(m));
    const auto rep = verify_basis_properties(sb);
    c.expect(rep.pass, "lattice " + std::to_string(tested) + ": " + (rep.violation ? rep.violation->describe() : ""));
    c.expect(sb.generates, "lattice " + std::to_string(tested) + " not generated");
    for (std::size_t i = 0; i < sb.elements.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const double a = angle_between(sb.elements[i].vector, sb.elements[j].vector);
        min_angle = std::min(min_angle, std::min(a, kPi - a));
      }
    if (n == 2) max_2d = std::max(max_2d, static_cast<int>(sb.elements.size()));
  }
  c.expect(min_angle >= kPi / 3 - 1e-9, "pairwise angle " + num(min_angle));
  c.expect(max_2d <= 6, "2-D basis with " + std::to_string(max_2d) + " elements");
  c.note("Z^2 (1,1), long torus (1,10); 100 lattices: min angle " + num(min_angle) + " (>= pi/3), max 2-D size " +
         std::to_string(max_2d));
  return c.done();
}

// 11. Excess functions.
Outcome excess_criterion() {
  Check c;
  const auto s = Manifold::sphere(2, 1.0);
  const auto anti = max_excess(s, make_vec({kPi / 2, 0.0}), make_vec({kPi / 2, kPi}), 10000, 11);
  c.expect(anti.samples == 10000 && anti.value <= 1e-6, "antipodal max excess " + num(anti.value));
  c.note("antipodal max over 10^4 samples " + num(anti.value));

  const std::vector<Manifold> spaces = {s, Manifold::parse("ellipsoid:a=1,b=1,c=0.8"),
                                        Manifold::parse("torus:basis=[[1,0],[0,1]]")};
  GeodesicOptions go;
  go.with_samples = false;
  Rng rng(1111);
  int done = 0, redraws = 0;
  double worst = 0.0;
  while (done < 100) {
    const Manifold& m = spaces[static_cast<std::size_t>(done % 3)];
    const Vec p0 = m.sample_point(rng), p1 = m.sample_point(rng), x = m.sample_point(rng);
    const double s0 = rng.uniform(), s1 = rng.uniform();
    try {
      auto toward = [&](const Vec& target, double frac) {
        const auto d = geodesic_distance(m, x, target, go);
        return exp_map(m, x, d.direction * (frac * d.length), go);
      };
      const Vec q0 = toward(p0, s0), q1 = toward(p1, s1);
      const double outer = excess_value(m, p0, p1, x, go);
      const double inner = excess_value(m, q0, q1, x, go);
      worst = std::max(worst, inner - outer);
      ++done;
    } catch (const Error&) {
      // Geodesics through a pole band of the chart cannot be followed.
      ++redraws;
      if (redraws > 50) break;
    }
  }
  c.expect(done == 100, "only " + std::to_string(done) + " configurations evaluated");
  c.expect(worst <= 1e-6, "monotonicity violated by " + num(worst));
  c.note("100 configurations, max(e' - e) = " + num(worst) + " (tol 1e-6), " + std::to_string(redraws) +
         " redraws");

  const double at_zero = regularity_angle_bound(0.37, 0.0);
  c.expect(std::abs(at_zero - 18 * kPi / 19) <= 1e-12, "rab(t, 0) = " + num(at_zero, 17));
  return c.done();
}

// 12. Regular points away from an antipodal pair.
Outcome sphere_regularity() {
  Check c;
  const auto s = Manifold::sphere(2, 1.0);
  const Vec p = make_vec({kPi / 2, 0.0});
  const Vec q = make_vec({kPi / 2, kPi});
  Rng rng(12);
  int tested = 0;
  double min_angle = kPi;
  while (tested < 50) {
    const Vec x = s.sample_point(rng);
    if (s.model_distance(p, x) < 0.1 || s.model_distance(q, x) < 0.1) continue;
    const auto rep = check_regular_point(s, p, q, x, 0.1);
    ++tested;
    min_angle = std::min(min_angle, rep.min_angle);
    c.expect(rep.regular, "x = (" + num(x[0]) + ", " + num(x[1]) + ") angle " + num(rep.min_angle));
  }
  c.note("50 points, min angle " + num(min_angle) + " > pi/2");
  return c.done();
}

std::vector<Vec> torus_grid(const Manifold& m, int g) {
  std::vector<Vec> out;
  for (int i = 0; i < g; ++i)
    for (int j = 0; j < g; ++j) out.push_back(m.lattice()->basis() * make_vec({double(i) / g, double(j) / g}));
  return out;
}

// 13. Fibration construction.
Outcome fibration_criterion() {
  Check c;
  // Identity coupling of the 10 x 10 torus with itself.
  const auto m = std::make_shared<const Manifold>(Manifold::parse("torus:basis=[[10,0],[0,10]]"));
  double prev_max = std::numeric_limits<double>::infinity();
  double prev_mean = prev_max;
  std::string series;
  for (double eps : {0.2, 0.1, 0.05}) {
    auto coupling = build_coupling(m, m, identity_chart_distance(m, m), eps, 0);
    FibrationOptions fo;
    fo.seed = split_seed(0, 4);
    FibrationMap fm(std::move(coupling), 1.2, fo);
    double mx = 0.0, sum = 0.0;
    const auto grid = torus_grid(*m, 20);
    for (const Vec& x : grid) {
      const double d = fibration_map(fm, x).displacement;
      mx = std::max(mx, d);
      sum += d;
    }
    const double mean = sum / static_cast<double>(grid.size());
    c.expect(mx < prev_max && mean < prev_mean, "displacement did not decrease at eps=" + num(eps));
    prev_max = mx;
    prev_mean = mean;
    series += (series.empty() ? "" : ", ") + num(eps) + ": " + num(mx, 3);
  }
  c.note("identity max d(x,f(x)) " + series);

  // Conformal torus (amplitude 0.05) onto the flat unit torus.
  const auto bumpy =
      std::make_shared<const Manifold>(Manifold::parse("conformal-torus:basis=[[1,0],[0,1]],amp=0.05,period=1"));
  const auto flat = std::make_shared<const Manifold>(Manifold::parse("torus:basis=[[1,0],[0,1]]"));
  auto coupling = build_coupling(bumpy, flat, identity_chart_distance(bumpy, flat), 0.03, 0);
  FibrationOptions fo;
  fo.seed = split_seed(0, 4);
  FibrationMap fm(std::move(coupling), 0.12, fo);
  double min_sv = std::numeric_limits<double>::infinity();
  for (const Vec& x : torus_grid(*bumpy, 20)) {
    min_sv = std::min(min_sv, check_submersion(fm, x).min_singular_value);
  }
  c.expect(min_sv > 0.0, "min singular value " + num(min_sv));
  c.note("perturbed min singular value " + num(min_sv, 4));

  // Bump function clauses, compared exactly.
  int bad = 0;
  for (double sigma : {0.12, 0.3, 1.2}) {
    for (int k = 0; k <= 1000; ++k) {
      const double t = sigma / 2 * k / 1000.0;
      bad += chi(t, sigma) != 1.0 || chi_derivative(t, sigma) != 0.0;
      const double u = sigma * (1.0 + k / 100.0);
      bad += chi(u, sigma) != 0.0 || chi_derivative(u, sigma) != 0.0;
    }
    bad += chi_lipschitz(sigma) != 15.0 / (4.0 * sigma);
  }
  c.expect(bad == 0, std::to_string(bad) + " chi clause mismatches");
  return c.done();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 14. Byte-identical reruns.
Outcome determinism() {
  Check c;
  const std::vector<std::pair<Experiment, std::string>> runs = {
      {Experiment::toponogov_check, "manifold = sphere:n=2,K=1\ntriangles = 40\nradius = 0.5\n"},
      {Experiment::rac_estimate, "manifold = hyperbolic:n=2,K=-1\nr_max = 4\ntriangles = 20\n"},
      {Experiment::excess_scan, "manifold = torus:basis=[[1,0],[0,1]]\np0 = [0, 0]\np1 = [0.5, 0]\nsamples = 300\n"},
      {Experiment::betti_bound, "n = 3\nH = -1\nr0 = 1\nD = 2\nrac = 0.5\n"},
      {Experiment::fibration_demo,
       "manifold = torus:basis=[[10,0],[0,10]]\ntarget = torus:basis=[[10,0],[0,10]]\neps = 0.2\nsigma = 1.2\n"
       "grid = 4\n"},
  };
  const auto dir = std::filesystem::temp_directory_path() / "riccilab_acceptance";
  std::filesystem::create_directories(dir);
  int files = 0;
  for (const auto& [exp, params] : runs) {
    std::string first[3];
    for (int rep = 0; rep < 2; ++rep) {
      ExperimentConfig ec;
      ec.experiment = exp;
      ec.params = Config::parse(params);
      ec.seed = 20240607;
      ec.threads = rep == 0 ? 1 : 4;
      ec.out = (dir / (std::string(to_string(exp)) + "_" + std::to_string(rep))).string();
      const auto r = run_and_write(ec);
      c.expect(r.exit_code == exit_pass, std::string(to_string(exp)) + " exit " + std::to_string(r.exit_code));
      const std::string got[3] = {slurp(ec.out + ".csv"), slurp(ec.out + ".jsonl"), slurp(ec.out + ".manifest")};
      for (int f = 0; f < 3; ++f) {
        if (rep == 0) {
          first[f] = got[f];
        } else {
          c.expect(!got[f].empty() && got[f] == first[f], std::string(to_string(exp)) + " output " +
                                                               std::to_string(f) + " differs");
          ++files;
        }
      }
    }
  }
  std::filesystem::remove_all(dir);
  c.note(std::to_string(files) + " file pairs compared (1 vs 4 threads)");
  return c.done();
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"euclidean-equality", euclidean_equality},
      {"sphere-toponogov", sphere_toponogov},
      {"conjugate-radius", conjugate_radius},
      {"rac-scale-equivariance", rac_equivariance},
      {"critical-angle-bound", cpe_formula},
      {"packing-consistency", packing_consistency},
      {"criticality", criticality},
      {"covering-soundness", covering_soundness},
      {"betti-calculator", betti_calculator},
      {"short-basis", short_basis_criterion},
      {"excess", excess_criterion},
      {"sphere-regularity", sphere_regularity},
      {"fibration", fibration_criterion},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("%s %2zu %s [%.1fs]: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
