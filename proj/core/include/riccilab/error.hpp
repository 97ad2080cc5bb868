#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riccilab {

enum class ErrorCode {
  invalid_argument,
  point_outside_chart,
  coordinate_singularity,
  unsupported_manifold,
  left_chart_domain,
  step_size_underflow,
  no_solution_found,
  degenerate_vertex,
  triangle_inequality_violation,
  perimeter_too_large,
  sampling_budget_exceeded,
  nu_below_threshold,
  invalid_theta,
  invalid_inputs,
  precondition_violated,
  enumeration_budget_exceeded,
  argument_out_of_range,
  pairing_failure,
  quadrature_failure,
  outside_reach,
  optimizer_divergence,
  hypothesis_violated,
  config_invalid,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI) can report the error by name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace riccilab
