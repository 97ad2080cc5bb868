#include "riccilab/excess.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "riccilab/error.hpp"
#include "riccilab/rng.hpp"

namespace riccilab {

namespace {

constexpr double kClamp = 1e-8;
constexpr double kNearMinimal = 1e-3;

double clamp_excess(double e) {
  if (e < 0.0 && e >= -kClamp) return 0.0;
  return e;
}

}  // namespace

double excess_value(const Manifold& m, const Vec& p0, const Vec& p1, const Vec& x, const GeodesicOptions& opts) {
  return clamp_excess(distance(m, p0, x, opts) + distance(m, p1, x, opts) - distance(m, p0, p1, opts));
}

MaxExcess max_excess(const Manifold& m, const Vec& p0, const Vec& p1, int n_samples, std::uint64_t seed,
                     const GeodesicOptions& opts) {
  if (n_samples < 1) fail(ErrorCode::invalid_argument, "max_excess needs n_samples >= 1");
  const double base = distance(m, p0, p1, opts);
  MaxExcess out;
  out.value = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < n_samples; ++k) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(k)));
    const Vec x = m.sample_point(rng);
    const double e = clamp_excess(distance(m, p0, x, opts) + distance(m, p1, x, opts) - base);
    if (e > out.value) {
      out.value = e;
      out.argmax = {p0, p1, x, e};
    }
  }
  out.samples = n_samples;
  return out;
}

double regularity_angle_bound(double t, double e) {
  if (!(t > 0.0) || !(e >= 0.0) || e > 2.0 * t * (1.0 + 1e-12)) {
    fail(ErrorCode::argument_out_of_range, fmt::format("need t > 0 and 0 <= e <= 2t (t = {}, e = {})", t, e));
  }
  const double arg = std::clamp(-1.0 - (e * e - 4.0 * e * t) / (2.0 * t * t), -1.0, 1.0);
  return 18.0 / 19.0 * std::acos(arg);
}

RegularityReport check_regular_point(const Manifold& m, const Vec& p, const Vec& q, const Vec& x, double delta,
                                     std::optional<double> rac, const GeodesicOptions& opts) {
  if (!(delta > 0.0)) fail(ErrorCode::invalid_argument, "delta must be positive");
  RegularityReport rep;
  const auto to_p = minimal_geodesics(m, x, p, kNearMinimal, opts);
  const auto to_q = minimal_geodesics(m, x, q, kNearMinimal, opts);
  if (to_p.empty() || to_q.empty()) fail(ErrorCode::precondition_violated, "x coincides with p or q");
  rep.d_xp = to_p.front().length;
  rep.d_xq = to_q.front().length;
  if (rep.d_xp < delta || rep.d_xq < delta) {
    fail(ErrorCode::precondition_violated,
         fmt::format("x is within delta = {} of p or q (distances {:.6g}, {:.6g})", delta, rep.d_xp, rep.d_xq));
  }
  rep.min_angle = std::numeric_limits<double>::infinity();
  for (const auto& a : to_p) {
    for (const auto& b : to_q) {
      rep.min_angle = std::min(rep.min_angle, m.angle(x, a.initial_velocity, b.initial_velocity));
      ++rep.pairs;
    }
  }
  rep.regular = rep.min_angle > 0.5 * std::numbers::pi;
  rep.excess = clamp_excess(rep.d_xp + rep.d_xq - distance(m, p, q, opts));

  // Excess is monotone under moving the base points toward x along minimal
  // geodesics, so the inner pair gives a sharper angle prediction.
  rep.step = rac ? std::min(*rac / 4.0, delta) : delta;
  const Vec pp = exp_map(m, x, rep.step * to_p.front().initial_velocity, opts);
  const Vec qq = exp_map(m, x, rep.step * to_q.front().initial_velocity, opts);
  rep.inner_excess = std::clamp(clamp_excess(2.0 * rep.step - distance(m, pp, qq, opts)), 0.0, 2.0 * rep.step);
  rep.predicted_bound = regularity_angle_bound(rep.step, rep.inner_excess);
  return rep;
}

std::string excess_csv_header() { return "p0,p1,x,e,min_angle,predicted_bound,regular"; }

std::string excess_csv_row(const ExcessSample& s, const RegularityReport& rep) {
  auto vec = [](const Vec& v) { return fmt::format("\"{:.10g}\"", fmt::join(v, " ")); };
  return fmt::format("{},{},{},{:.12g},{:.12g},{:.12g},{}", vec(s.p0), vec(s.p1), vec(s.x), s.e, rep.min_angle,
                     rep.predicted_bound, rep.regular ? 1 : 0);
}

}  // namespace riccilab
