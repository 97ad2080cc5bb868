#include "riccilab/bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "power_integrals.hpp"
#include "riccilab/critical.hpp"
#include "riccilab/error.hpp"

namespace riccilab {

namespace {

// ceil that ignores relative rounding noise just above an integer.
double ceil_slack(double x) { return std::ceil(x * (1.0 - 1e-12)); }

// Integral of sn_H^{n-1} over [0, r], without the sphere-area factor.
double radial_integral(int n, double H, double r) {
  if (H == 0.0) return std::pow(r, n) / n;
  const double k = std::sqrt(std::abs(H));
  if (H > 0.0) r = std::min(r, std::numbers::pi / k);
  return detail::power_integral(n - 1, k * r, H < 0.0) / std::pow(k, n);
}

double sphere_area(int n) {
  // vol(S^{n-1}) = 2 pi^{n/2} / Gamma(n/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

BoundValue from_log2(double log2, std::optional<double> exact_double = std::nullopt) {
  BoundValue v;
  v.log2 = log2;
  if (exact_double && *exact_double < 9007199254740992.0) {
    v.exact = static_cast<std::uint64_t>(*exact_double);
  }
  return v;
}

}  // namespace

void validate(const BoundInputs& in) {
  if (in.n < 2) fail(ErrorCode::invalid_inputs, "n must be >= 2");
  if (!std::isfinite(in.H)) fail(ErrorCode::invalid_inputs, "H must be finite");
  if (!(in.r0 > 0.0)) fail(ErrorCode::invalid_inputs, "r0 must be positive");
  if (!(in.D > 0.0) || !std::isfinite(in.D)) fail(ErrorCode::invalid_inputs, "D must be positive and finite");
  if (!(in.rac > 0.0)) fail(ErrorCode::invalid_inputs, "rac must be positive");
}

std::string BoundValue::to_string(bool log_scale) const {
  if (!log_scale && exact) return fmt::format("{}", *exact);
  return fmt::format("2^{:.17g}", log2);
}

double model_volume(int n, double H, double r) {
  if (n < 1) fail(ErrorCode::invalid_inputs, "model_volume needs n >= 1");
  if (!(r > 0.0) || !std::isfinite(r) || !std::isfinite(H)) {
    fail(ErrorCode::invalid_inputs, "model_volume needs finite r > 0 and finite H");
  }
  return sphere_area(n) * radial_integral(n, H, r);
}

CoveringNumbers covering_number(int n, double H, double r, double eps) {
  if (n < 1) fail(ErrorCode::invalid_inputs, "covering_number needs n >= 1");
  if (!(eps > 0.0 && eps <= r) || !std::isfinite(r)) fail(ErrorCode::invalid_inputs, "need 0 < eps <= r");
  const double small = radial_integral(n, H, 0.5 * eps);
  CoveringNumbers c;
  c.N1 = ceil_slack(radial_integral(n, H, r + 0.5 * eps) / small);
  c.N2 = ceil_slack(radial_integral(n, H, 2.5 * eps) / small);
  return c;
}

int rank_bound(int n) {
  if (n < 2) fail(ErrorCode::invalid_inputs, "n must be >= 2");
  return static_cast<int>(std::floor(packing_count(n, cpe_angle_lower_bound(1.25))));
}

BoundTrace betti_bound(const BoundInputs& in, const BettiOptions& opts) {
  validate(in);
  if (!(opts.base_divisor > 0.0)) fail(ErrorCode::invalid_inputs, "base divisor must be positive");
  BoundTrace tr;
  tr.inputs = in;
  tr.H_eff = std::min(in.H, 0.0);
  tr.rank = rank_bound(in.n);
  tr.base_divisor = opts.base_divisor;
  tr.base_radius = in.rac / opts.base_divisor;

  const double shrink = std::pow(10.0, -(in.n + 1));
  const double log2_n1 = std::log2(in.n + 1.0);
  double prefix = 0.0;  // sum of log2 factors of the levels above
  int first_base = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int k = 0;; ++k) {
    BoundLevel lv;
    lv.level = k;
    lv.r = 2.0 * in.D / std::pow(10.0, k);
    lv.eps = shrink * lv.r;
    const CoveringNumbers c = covering_number(in.n, tr.H_eff, lv.r, lv.eps);
    lv.N1 = c.N1;
    lv.N2 = c.N2;
    lv.log2_factor = log2_n1 + c.N1;
    if (first_base < 0 && lv.r <= tr.base_radius * (1.0 + 1e-12)) first_base = k;
    if (first_base >= 0) {
      lv.log2_bound = prefix + tr.rank * lv.log2_factor;
      if (*lv.log2_bound < best) {
        best = *lv.log2_bound;
        tr.chosen_level = k;
      }
    }
    prefix += lv.log2_factor;
    tr.levels.push_back(lv);
    if (first_base >= 0 && k >= first_base + opts.extra_levels) break;
    if (k > 400) fail(ErrorCode::invalid_inputs, "recursion depth exceeded; rac is too small relative to D");
  }
  tr.levels[tr.chosen_level].chosen = true;

  // Exact integer value when small enough: prod_{j<k} (n+1) 2^{N_j} * ((n+1) 2^{N_k})^rank.
  std::optional<double> exact;
  if (best < 53.0) exact = std::round(std::exp2(best));
  tr.value = from_log2(best, exact);
  return tr;
}

Pi1Bound pi1_generator_bound(const BoundInputs& in) {
  validate(in);
  Pi1Bound b;
  b.r1 = std::min(in.rac, in.r0) / 6.0;
  const double eps = std::min(b.r1, in.D);
  b.N1 = covering_number(in.n, std::min(in.H, 0.0), in.D, eps).N1;
  b.per_ball = static_cast<int>(std::floor(std::pow(19.0 / 3.0, in.n - 1) * (1.0 + 1e-15)));
  const double value = b.N1 * b.per_ball;
  b.value = from_log2(std::log2(value), value);
  return b;
}

std::string trace_jsonl(const BoundTrace& tr) {
  std::string out;
  for (const auto& lv : tr.levels) {
    nlohmann::json j{{"level", lv.level}, {"r", lv.r},         {"eps", lv.eps},
                     {"N1", lv.N1},       {"N2", lv.N2},       {"rank", tr.rank},
                     {"log2_factor", lv.log2_factor},          {"chosen", lv.chosen}};
    j["log2_bound"] = lv.log2_bound ? nlohmann::json(*lv.log2_bound) : nlohmann::json(nullptr);
    out += j.dump() + "\n";
  }
  nlohmann::json s{{"n", tr.inputs.n},
                   {"H", tr.inputs.H},
                   {"H_eff", tr.H_eff},
                   {"r0", tr.inputs.r0},
                   {"D", tr.inputs.D},
                   {"rac", tr.inputs.rac},
                   {"base_divisor", tr.base_divisor},
                   {"base_radius", tr.base_radius},
                   {"rank", tr.rank},
                   {"chosen_level", tr.chosen_level},
                   {"log2_value", tr.value.log2}};
  s["value"] = tr.value.exact ? nlohmann::json(*tr.value.exact) : nlohmann::json(nullptr);
  out += nlohmann::json{{"summary", s}}.dump() + "\n";
  return out;
}

std::string trace_table(const BoundTrace& tr, bool log_scale) {
  std::string out = fmt::format("{:>5} {:>12} {:>12} {:>14} {:>6} {:>6} {:>22} {:>22}\n", "level", "r", "eps", "N1",
                                "N2", "rank", "log2 factor", "log2 bound");
  for (const auto& lv : tr.levels) {
    out += fmt::format("{:>5} {:>12.6g} {:>12.6g} {:>14.0f} {:>6.0f} {:>6} {:>22.10f} {:>22}{}\n", lv.level, lv.r,
                       lv.eps, lv.N1, lv.N2, tr.rank, lv.log2_factor,
                       lv.log2_bound ? fmt::format("{:.10f}", *lv.log2_bound) : std::string("-"),
                       lv.chosen ? " *" : "");
  }
  out += fmt::format("bound = {} (base case for r <= rac/{} = {:.6g})\n", tr.value.to_string(log_scale),
                     tr.base_divisor, tr.base_radius);
  return out;
}

}  // namespace riccilab
