#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include <Eigen/Dense>

#include "riccilab/error.hpp"

namespace riccilab {

/// State vector for the geodesic, variational and Jacobi systems; capacity
/// covers 2n + 2n^2 at n = 4.
using OdeState = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 40, 1>;

struct Dopri5Options {
  double rtol = 1e-8;
  double atol = 1e-8;
  double h_init = 1e-2;
  double h_max = 0.1;
  std::size_t max_steps = 2'000'000;
};

/// Dormand-Prince 5(4) with standard PI-free step control. `rhs(t, y, dy)`
/// fills dy. After every accepted step `observer(t, y)` is called; returning
/// false stops the integration early. Returns the final time reached.
/// Raises step_size_underflow when the controller needs h below ~1e-14 |t|.
template <typename Rhs, typename Observer>
double dopri5(Rhs&& rhs, OdeState& y, double t0, double t1, const Dopri5Options& opt, Observer&& observer) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  const Eigen::Index n = y.size();
  OdeState k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n), err(n);
  double t = t0;
  double h = std::min(opt.h_init, opt.h_max);
  rhs(t, y, k1);
  std::size_t steps = 0;
  while (t < t1) {
    if (++steps > opt.max_steps) fail(ErrorCode::step_size_underflow, "integrator step budget exhausted");
    bool last = false;
    if (t + h >= t1 - 1e-12 * std::max(1.0, std::abs(t1))) {
      h = t1 - t;
      last = true;
    }
    if (h <= 1e-14 * std::max(1.0, std::abs(t))) fail(ErrorCode::step_size_underflow, "step size underflow");
    tmp = y + h * a21 * k1;
    rhs(t + c2 * h, tmp, k2);
    tmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, tmp, k3);
    tmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, tmp, k4);
    tmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, tmp, k5);
    tmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, tmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    double norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      norm += (err[i] / sc) * (err[i] / sc);
    }
    norm = std::sqrt(norm / static_cast<double>(n));
    if (!std::isfinite(norm)) {
      h *= 0.2;
      continue;
    }
    if (norm <= 1.0) {
      t = last ? t1 : t + h;
      y = ynew;
      k1 = k7;
      if (!observer(t, y)) return t;
      const double fac = norm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(norm, -0.2), 0.2, 5.0);
      h = std::min(h * fac, opt.h_max);
    } else {
      h *= std::max(0.2, 0.9 * std::pow(norm, -0.2));
    }
  }
  return t;
}

/// One classical Runge-Kutta step of size h.
template <typename Rhs>
void rk4_step(Rhs&& rhs, OdeState& y, double t, double h) {
  const Eigen::Index n = y.size();
  OdeState k1(n), k2(n), k3(n), k4(n), tmp(n);
  rhs(t, y, k1);
  tmp = y + 0.5 * h * k1;
  rhs(t + 0.5 * h, tmp, k2);
  tmp = y + 0.5 * h * k2;
  rhs(t + 0.5 * h, tmp, k3);
  tmp = y + h * k3;
  rhs(t + h, tmp, k4);
  y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace riccilab
