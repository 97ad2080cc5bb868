#pragma once

#include <array>
#include <cmath>

namespace riccilab::detail {

/// integral_0^x sin^m(t) dt (hyperbolic = false) or sinh^m(t) dt (true).
/// Taylor series of (sin t / t)^m below x = 1, where the reduction formula
/// loses digits to cancellation; the reduction formula above.
inline double power_integral(int m, double x, bool hyperbolic) {
  if (x <= 0.0) return 0.0;
  if (x < 1.0) {
    constexpr int kTerms = 24;
    std::array<double, kTerms> base{}, acc{};
    double fact = 1.0;
    for (int i = 0; i < kTerms; ++i) {
      if (i > 0) fact *= (2.0 * i) * (2.0 * i + 1.0);
      base[i] = ((hyperbolic || i % 2 == 0) ? 1.0 : -1.0) / fact;
    }
    acc.fill(0.0);
    acc[0] = 1.0;
    for (int p = 0; p < m; ++p) {
      std::array<double, kTerms> next{};
      for (int i = 0; i < kTerms; ++i)
        for (int j = 0; i + j < kTerms; ++j) next[i + j] += acc[i] * base[j];
      acc = next;
    }
    double sum = 0.0;
    const double x2 = x * x;
    double xp = std::pow(x, m + 1);
    for (int i = 0; i < kTerms; ++i) {
      sum += acc[i] * xp / (m + 2 * i + 1);
      xp *= x2;
    }
    return sum;
  }
  const double s = hyperbolic ? std::sinh(x) : std::sin(x);
  const double c = hyperbolic ? std::cosh(x) : std::cos(x);
  // sin:  I_j = -s^{j-1} c / j + (j-1)/j I_{j-2}
  // sinh: J_j =  s^{j-1} c / j - (j-1)/j J_{j-2}
  double prev = (m % 2 == 0) ? x : (hyperbolic ? c - 1.0 : 1.0 - c);
  for (int j = (m % 2 == 0) ? 2 : 3; j <= m; j += 2) {
    const double head = std::pow(s, j - 1) * c / j;
    const double tail = static_cast<double>(j - 1) / j * prev;
    prev = hyperbolic ? head - tail : -head + tail;
  }
  return prev;
}

}  // namespace riccilab::detail
