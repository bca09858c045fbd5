#pragma once

// Scalar special functions used by the null distributions: regularized
// incomplete gamma (series + continued fraction), chi-square CDF/SF/quantile
// for real degrees of freedom, and the inverse normal CDF (Wichura's AS 241,
// double precision branch).

#include <cmath>
#include <limits>
#include <string>

#include "sbss/errors.hpp"

namespace sbss {

namespace detail {

inline constexpr int kGammaMaxIter = 500;
inline constexpr double kGammaEps = 1e-16;
inline constexpr double kFpMin = std::numeric_limits<double>::min() / kGammaEps;

// Lower regularized incomplete gamma by power series; requires x < a + 1.
inline double gamma_p_series(double a, double x) {
  double ap = a;
  double term = 1.0 / a;
  double sum = term;
  for (int i = 0; i < kGammaMaxIter; ++i) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) {
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw QuadratureFailure("incomplete gamma series did not converge (a=" +
                          std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

// Upper regularized incomplete gamma by modified Lentz continued fraction;
// requires x >= a + 1.
inline double gamma_q_contfrac(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kFpMin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kGammaMaxIter; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = b + an / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kGammaEps) {
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
  }
  throw QuadratureFailure("incomplete gamma continued fraction did not converge (a=" +
                          std::to_string(a) + ", x=" + std::to_string(x) + ")");
}

}  // namespace detail

// Lower regularized incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
inline double lower_regularized_gamma(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("lower_regularized_gamma: shape must be positive");
  if (!(x >= 0.0)) throw ValidationError("lower_regularized_gamma: argument must be non-negative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

// Upper regularized incomplete gamma Q(a, x) = 1 - P(a, x).
inline double upper_regularized_gamma(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("upper_regularized_gamma: shape must be positive");
  if (!(x >= 0.0)) throw ValidationError("upper_regularized_gamma: argument must be non-negative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
  return detail::gamma_q_contfrac(a, x);
}

// Chi-square CDF with real df > 0; x <= 0 maps to 0.
inline double chi2_cdf(double x, double df) {
  if (!(df > 0.0)) throw ValidationError("chi2_cdf: df must be positive");
  if (x <= 0.0) return 0.0;
  return lower_regularized_gamma(df / 2.0, x / 2.0);
}

// Chi-square survival function P(X > x); x <= 0 maps to 1.
inline double chi2_sf(double x, double df) {
  if (!(df > 0.0)) throw ValidationError("chi2_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return upper_regularized_gamma(df / 2.0, x / 2.0);
}

// Chi-square quantile: smallest x with CDF(x) >= p, by bracketing bisection.
inline double chi2_quantile(double p, double df) {
  if (!(df > 0.0)) throw ValidationError("chi2_quantile: df must be positive");
  if (!(p >= 0.0 && p < 1.0)) throw ValidationError("chi2_quantile: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;
  double lo = 0.0;
  double hi = df + 10.0 * std::sqrt(2.0 * df) + 10.0;
  while (chi2_cdf(hi, df) < p) {
    hi *= 2.0;
    if (hi > 1e300) throw QuadratureFailure("chi2_quantile: bracket expansion failed");
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (chi2_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-14 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

// Inverse standard normal CDF (AS 241, PPND16). Requires p in (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("normal_quantile: p must lie in (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r + 3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r + 1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
    x = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
    x = num / den;
  }
  return (q < 0.0) ? -x : x;
}

}  // namespace sbss
