#pragma once

#include <cmath>
#include <span>

#include "biasamp/detmath.hpp"
#include "biasamp/error.hpp"

namespace biasamp::stats {

inline double mean(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

inline double population_stddev(std::span<const double> values) {
  const double m = mean(values);
  double sum = 0.0;
  for (double v : values) sum += (v - m) * (v - m);
  return std::sqrt(sum / static_cast<double>(values.size()));
}

// Lanczos approximation (g = 7, 9 terms), valid for z >= 0.5 which covers
// every use here (beta arguments are >= 1/2).
inline double log_gamma(double z) {
  static constexpr double kCoef[9] = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  const double x = z - 1.0;
  double sum = kCoef[0];
  for (int i = 1; i < 9; ++i) sum += kCoef[i] / (x + static_cast<double>(i));
  const double base = x + 7.5;
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  return kHalfLog2Pi + (x + 0.5) * detmath::det_log(base) - base +
         detmath::det_log(sum);
}

namespace detail {

// Continued fraction for the incomplete beta (Lentz's algorithm).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double dm = static_cast<double>(m);
    const double m2 = 2.0 * dm;
    double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

} // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = a * detmath::det_log(x) + b * detmath::det_log(1.0 - x) -
                          (log_gamma(a) + log_gamma(b) - log_gamma(a + b));
  const double front = detmath::det_exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * detail::beta_cf(a, b, x) / a;
  }
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// CDF of Student's t with dof degrees of freedom.
inline double student_t_cdf(double t, double dof) {
  const double x = dof / (dof + t * t);
  const double p = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? 1.0 - p : p;
}

// Two-sided quantile: returns t with CDF(t) = p, p in (0.5, 1). Bisection,
// deterministic to ~1e-12 relative.
inline double student_t_quantile(double p, double dof) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("t quantile needs p in (0, 1)");
  if (!(dof >= 1.0)) throw ConfigError("t quantile needs dof >= 1");
  if (p == 0.5) return 0.0;
  const bool upper = p > 0.5;
  const double target = upper ? p : 1.0 - p;
  double hi = 1.0;
  while (student_t_cdf(hi, dof) < target && hi < 1e12) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, dof) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double q = 0.5 * (lo + hi);
  return upper ? q : -q;
}

} // namespace biasamp::stats
