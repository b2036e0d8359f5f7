#pragma once

#include <cmath>
#include <limits>

// Fixed-polynomial exp/log so that every numeric result is a pure function of
// the inputs, independent of the host libm. Only IEEE-exact primitives are
// used underneath (+,-,*,/, sqrt, frexp, ldexp). Accuracy is ~1 ulp, which is
// plenty for losses and noise generation; the point is reproducibility.

namespace biasamp::detmath {

inline constexpr double kLn2Hi = 6.93147180369123816490e-01;
inline constexpr double kLn2Lo = 1.90821492927058770002e-10;
inline constexpr double kInvLn2 = 1.44269504088896340736;

// exp(z) via argument reduction z = k*ln2 + r, |r| <= ln2/2, and a degree-13
// Taylor polynomial in r (truncation error < 4e-18 relative).
inline double det_exp(double z) {
  if (std::isnan(z)) return z;
  if (z > 709.782712893384) return std::numeric_limits<double>::infinity();
  if (z < -745.133219101941) return 0.0;
  const double k = std::floor(z * kInvLn2 + 0.5);
  const double r = (z - k * kLn2Hi) - k * kLn2Lo;
  // Horner over 1/n! for n = 13 .. 0.
  double p = 1.6059043836821613e-10;          // 1/13!
  p = p * r + 2.08767569878680989792e-09;     // 1/12!
  p = p * r + 2.50521083854417187751e-08;     // 1/11!
  p = p * r + 2.75573192239858906526e-07;     // 1/10!
  p = p * r + 2.75573192239858925110e-06;     // 1/9!
  p = p * r + 2.48015873015873015873e-05;     // 1/8!
  p = p * r + 1.98412698412698412698e-04;     // 1/7!
  p = p * r + 1.38888888888888888889e-03;     // 1/6!
  p = p * r + 8.33333333333333333333e-03;     // 1/5!
  p = p * r + 4.16666666666666666667e-02;     // 1/4!
  p = p * r + 1.66666666666666666667e-01;     // 1/3!
  p = p * r + 0.5;
  p = p * r + 1.0;
  p = p * r + 1.0;
  return std::ldexp(p, static_cast<int>(k));
}

// ln(x) via x = m * 2^e with m in [sqrt(1/2), sqrt(2)), then
// ln(m) = 2*atanh(t), t = (m-1)/(m+1), as a degree-21 odd series
// (|t| < 0.1716, truncation < 5e-18).
inline double det_log(double x) {
  if (std::isnan(x) || x < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return x;
  int e = 0;
  double m = std::frexp(x, &e); // m in [0.5, 1)
  if (m < 0.70710678118654752440) {
    m *= 2.0;
    e -= 1;
  }
  const double t = (m - 1.0) / (m + 1.0);
  const double t2 = t * t;
  double p = 1.0 / 21.0;
  p = p * t2 + 1.0 / 19.0;
  p = p * t2 + 1.0 / 17.0;
  p = p * t2 + 1.0 / 15.0;
  p = p * t2 + 1.0 / 13.0;
  p = p * t2 + 1.0 / 11.0;
  p = p * t2 + 1.0 / 9.0;
  p = p * t2 + 1.0 / 7.0;
  p = p * t2 + 1.0 / 5.0;
  p = p * t2 + 1.0 / 3.0;
  p = p * t2 + 1.0;
  const double de = static_cast<double>(e);
  return de * kLn2Hi + (de * kLn2Lo + 2.0 * t * p);
}

// Logistic function, overflow-safe on both sides.
inline double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + det_exp(-z));
  }
  const double e = det_exp(z);
  return e / (1.0 + e);
}

// ln(1 + e^z), the stable building block of binary cross-entropy.
inline double softplus(double z) {
  if (z > 0.0) {
    return z + det_log(1.0 + det_exp(-z));
  }
  return det_log(1.0 + det_exp(z));
}

} // namespace biasamp::detmath
