#include "riccilab/error.hpp"

namespace riccilab {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::point_outside_chart: return "point-outside-chart";
    case ErrorCode::coordinate_singularity: return "coordinate-singularity";
    case ErrorCode::unsupported_manifold: return "unsupported-manifold";
    case ErrorCode::left_chart_domain: return "left-chart-domain";
    case ErrorCode::step_size_underflow: return "step-size-underflow";
    case ErrorCode::no_solution_found: return "no-solution-found";
    case ErrorCode::degenerate_vertex: return "degenerate-vertex";
    case ErrorCode::triangle_inequality_violation: return "triangle-inequality-violation";
    case ErrorCode::perimeter_too_large: return "perimeter-too-large";
    case ErrorCode::sampling_budget_exceeded: return "sampling-budget-exceeded";
    case ErrorCode::nu_below_threshold: return "nu-below-threshold";
    case ErrorCode::invalid_theta: return "invalid-theta";
    case ErrorCode::invalid_inputs: return "invalid-inputs";
    case ErrorCode::precondition_violated: return "precondition-violated";
    case ErrorCode::enumeration_budget_exceeded: return "enumeration-budget-exceeded";
    case ErrorCode::argument_out_of_range: return "argument-out-of-range";
    case ErrorCode::pairing_failure: return "pairing-failure";
    case ErrorCode::quadrature_failure: return "quadrature-failure";
    case ErrorCode::outside_reach: return "outside-reach";
    case ErrorCode::optimizer_divergence: return "optimizer-divergence";
    case ErrorCode::hypothesis_violated: return "hypothesis-violated";
    case ErrorCode::config_invalid: return "config-invalid";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace riccilab
