#pragma once

#include <cmath>

namespace homsim {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Modified Bessel function of the first kind, order zero.
///
/// Power series sum_k (x/2)^{2k} / (k!)^2 with term-ratio stopping at
/// relative 1e-16. Every term is positive, so there is no cancellation and
/// the relative error stays below 1e-12 for |x| <= 30. The click-probability
/// expressions only ever need |x| <= 2 eta sqrt(mu_a mu_b) <~ 2.
inline double bessel_i0(double x) {
  const double q = 0.25 * x * x; // (x/2)^2, even in x
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 256; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term <= sum * 1e-16) break;
  }
  return sum;
}

/// ln(n!) via lgamma; exact enough for Poisson weights at any count.
inline double log_factorial(unsigned n) {
  return std::lgamma(static_cast<double>(n) + 1.0);
}

} // namespace homsim
