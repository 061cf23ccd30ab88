#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace condsamp {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;  // log(sqrt(2*pi))

/// log(sum(exp(v))) with the usual max shift. Empty or all -inf gives -inf.
inline double log_sum_exp(std::span<const double> v) {
  double mx = kNegInf;
  for (double x : v) mx = std::max(mx, x);
  if (mx == kNegInf) return kNegInf;
  if (mx == std::numeric_limits<double>::infinity()) return mx;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

/// log(exp(a) + exp(b)).
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double mx = std::max(a, b);
  return mx + std::log1p(std::exp(-std::abs(a - b)));
}

inline double log_normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return -0.5 * u * u - std::log(sd) - kLogSqrt2Pi;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// log of the upper normal tail, log(1 - Phi(x)), accurate for large x.
inline double log_normal_sf(double x) {
  if (x < 30.0) return std::log(0.5 * std::erfc(x / std::numbers::sqrt2));
  // asymptotic Mills-ratio expansion
  const double x2 = x * x;
  const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
  return -0.5 * x2 - std::log(x) - kLogSqrt2Pi + std::log(series);
}

/// log(Phi(hi) - Phi(lo)) for lo <= hi, stable in both tails.
inline double log_normal_interval(double lo, double hi) {
  if (!(hi > lo)) return kNegInf;
  if (lo >= 0.0) {
    const double a = log_normal_sf(lo);
    const double b = log_normal_sf(hi);
    return a + std::log1p(-std::exp(b - a));
  }
  if (hi <= 0.0) return log_normal_interval(-hi, -lo);
  // straddles zero: the mass is at least Phi(hi) - 1/2, no cancellation issue
  return std::log(1.0 - 0.5 * std::erfc(hi / std::numbers::sqrt2) -
                  0.5 * std::erfc(-lo / std::numbers::sqrt2));
}

/// Log-density of Beta(a, b) at z.
inline double log_beta_pdf(double z, double a, double b) {
  if (!(z > 0.0 && z < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(z) + (b - 1.0) * std::log1p(-z) + std::lgamma(a + b) - std::lgamma(a) -
         std::lgamma(b);
}

}  // namespace condsamp
