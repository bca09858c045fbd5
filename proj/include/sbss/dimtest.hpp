#pragma once

// White-noise dimension tests. The statistic for H_{0r} sums the squared
// trailing (p-r)x(p-r) blocks of the D matrices, scaled by n/2. Under the
// renormalized estimator with pairwise-disjoint kernel supports it is
// asymptotically chi-square with k (p-r)(p-r+1)/2 degrees of freedom; the
// unnormalized variant is a weighted sum of independent chi-squares with
// the kernel normalizations as weights, evaluated by Imhof's oscillatory
// integral with a tracked truncation bound (Pearson three-moment fallback).

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include "sbss/diag.hpp"
#include "sbss/errors.hpp"
#include "sbss/special.hpp"

namespace sbss {

// t_r = (n/2) sum_l || D_l[(r+1):p, (r+1):p] ||_F^2.
inline double statistic(const SbssSolution& sol, int r, Index n) {
  const Index p = sol.p();
  if (r < 0 || r > p - 1) {
    throw RankOutOfRange("statistic: r must lie in [0, " + std::to_string(p - 1) + "]");
  }
  double acc = 0.0;
  for (const Matrix& d : sol.d_matrices) {
    acc += d.bottomRightCorner(p - r, p - r).squaredNorm();
  }
  return 0.5 * static_cast<double>(n) * acc;
}

inline double statistic(const SbssSolution& sol, int r) { return statistic(sol, r, sol.n); }

inline int chi2_test_df(Index p, int r, int k) {
  return k * static_cast<int>((p - r) * (p - r + 1) / 2);
}

// P(chi2_df > t) for the renormalized statistic.
inline double asymptotic_pvalue(double t, Index p, int r, int k) {
  return chi2_sf(t, static_cast<double>(chi2_test_df(p, r, k)));
}

// Pearson three-moment approximation to P(sum_l w_l X_l > t),
// X_l ~ chi2_{df_each} independent: a chi-square matched in its first three
// cumulants kappa_j = 2^{j-1} (j-1)! df_each sum_l w_l^j.
inline double weighted_chi2_pvalue_moment(double t, const std::vector<double>& weights,
                                          int df_each) {
  if (weights.empty()) throw ValidationError("weighted_chi2_pvalue_moment: no weights");
  if (df_each < 1) throw ValidationError("weighted_chi2_pvalue_moment: df_each must be >= 1");
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("weighted_chi2_pvalue_moment: weights must be positive");
    s1 += w;
    s2 += w * w;
    s3 += w * w * w;
  }
  const double h = static_cast<double>(df_each);
  const double k1 = h * s1;
  const double k2 = 2.0 * h * s2;
  const double k3 = 8.0 * h * s3;
  const double c = k3 / (4.0 * k2);
  const double nu = 8.0 * k2 * k2 * k2 / (k3 * k3);
  const double a = k1 - c * nu;
  const double x = (t - a) / c;
  if (x <= 0.0) return 1.0;
  return chi2_sf(x, nu);
}

namespace detail {

struct ImhofBudget {
  long evals = 0;
  static constexpr long kMaxEvals = 20'000'000;
};

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth, ImhofBudget& budget) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  budget.evals += 2;
  if (budget.evals > ImhofBudget::kMaxEvals) {
    throw QuadratureFailure("weighted chi-square quadrature exceeded its evaluation budget");
  }
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol || depth >= 40) {
    if (depth >= 40 && std::abs(err) > 15.0 * tol) {
      throw QuadratureFailure("weighted chi-square quadrature did not reach its tolerance");
    }
    return left + right + err / 15.0;
  }
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, budget) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, budget);
}

}  // namespace detail

// P(sum_l w_l X_l > t) with X_l ~ chi2_{df_each} independent, to absolute
// tolerance `tol`, by Imhof's formula
//   P = 1/2 + (1/pi) Int_0^inf sin(theta(u)) / (u rho(u)) du.
// Equal weights reduce exactly to a scaled chi-square. Throws
// QuadratureFailure when the tolerance cannot be certified.
inline double weighted_chi2_pvalue(double t, const std::vector<double>& weights, int df_each,
                                   double tol = 1e-6) {
  if (weights.empty()) throw ValidationError("weighted_chi2_pvalue: no weights");
  if (df_each < 1) throw ValidationError("weighted_chi2_pvalue: df_each must be >= 1");
  for (double w : weights) {
    if (!(w > 0.0)) throw ValidationError("weighted_chi2_pvalue: weights must be positive");
  }
  if (t <= 0.0) return 1.0;

  const double wmin = *std::min_element(weights.begin(), weights.end());
  const double wmax = *std::max_element(weights.begin(), weights.end());
  const double h = static_cast<double>(df_each);
  if (wmax - wmin <= 1e-12 * wmax) {
    const double w = 0.5 * (wmin + wmax);
    return chi2_sf(t / w, h * static_cast<double>(weights.size()));
  }

  const auto theta = [&](double u) {
    double s = 0.0;
    for (double w : weights) s += std::atan(w * u);
    return 0.5 * h * s - 0.5 * t * u;
  };
  const auto log_rho = [&](double u) {
    double s = 0.0;
    for (double w : weights) s += std::log1p(w * w * u * u);
    return 0.25 * h * s;
  };
  const auto integrand = [&](double u) {
    if (u < 1e-12) {
      double sw = 0.0;
      for (double w : weights) sw += w;
      return 0.5 * (h * sw - t);
    }
    return std::sin(theta(u)) * std::exp(-log_rho(u)) / u;
  };
  // Derivative of the oscillation phase; decreasing, tends to -t/2.
  const auto phase_rate = [&](double u) {
    double s = 0.0;
    for (double w : weights) s += w / (1.0 + w * w * u * u);
    return 0.5 * h * s - 0.5 * t;
  };

  // Truncation point: phase derivative below -t/4 and envelope tail bound
  // |Int_U^inf| <= 2 e(U) / (t/4) within half the tolerance.
  double upper = 1.0;
  const double tail_target = 0.5 * tol * M_PI;  // integral-scale tolerance
  for (int i = 0;; ++i) {
    const bool phase_ok = phase_rate(upper) <= -0.25 * t;
    const double envelope = std::exp(-log_rho(upper)) / upper;
    if (phase_ok && 8.0 * envelope / t <= tail_target) break;
    upper *= 2.0;
    if (i > 80) throw QuadratureFailure("weighted chi-square quadrature: no usable truncation point");
  }

  // Chunk the truncated range so each piece spans a bounded phase change.
  const double phase_span =
      0.25 * M_PI * h * static_cast<double>(weights.size()) + 0.5 * t * upper;
  const long chunks = std::min<long>(
      std::max<long>(8, static_cast<long>(phase_span / 2.0) + 1), 500'000);
  const double quad_tol = 0.5 * tol * M_PI / static_cast<double>(chunks);

  detail::ImhofBudget budget;
  double total = 0.0;
  double prev_x = 0.0;
  double prev_f = integrand(0.0);
  for (long c = 1; c <= chunks; ++c) {
    const double x = upper * static_cast<double>(c) / static_cast<double>(chunks);
    const double fx = integrand(x);
    const double xm = 0.5 * (prev_x + x);
    const double fm = integrand(xm);
    budget.evals += 2;
    const double whole = (x - prev_x) / 6.0 * (prev_f + 4.0 * fm + fx);
    total += detail::adaptive_simpson(integrand, prev_x, x, prev_f, fm, fx, whole, quad_tol, 0,
                                      budget);
    prev_x = x;
    prev_f = fx;
  }

  const double p = 0.5 + total / M_PI;
  return std::min(1.0, std::max(0.0, p));
}

struct ChiSquareNull {
  int df;
};

struct WeightedChiSquareNull {
  std::vector<double> weights;
  int df_each;
  bool moment_matched = false;  // true when Imhof fell back to moment matching
};

struct BootstrapNull {
  int replicates;
  int count_geq;
};

using NullModel = std::variant<ChiSquareNull, WeightedChiSquareNull, BootstrapNull>;

struct TestResult {
  int r = 0;
  double stat = 0.0;
  NullModel null_model;
  double p_value = 1.0;
  std::string method;
};

struct TestOptions {
  bool centered = true;
  bool unnormalized = false;  // Use the unnormalized statistic and its weighted null
  bool allow_ball = false;    // Permit kernels with f(0) != 0 (invalid theory, exploratory)
  JointDiagOptions jd{};
};

namespace detail {

inline void check_test_kernels(const KernelSet& kernels, bool allow_ball) {
  if (allow_ball) return;
  for (const Kernel& k : kernels.kernels) {
    if (!k.zero_at_origin()) {
      throw ValidationError("kernel " + k.spec_string() +
                            " is non-zero at lag 0, which invalidates the dimension test; "
                            "pass allow_ball to override");
    }
  }
}

inline void check_rank(Index p, int r) {
  if (r < 0 || r > p - 1) {
    throw RankOutOfRange("r must lie in [0, " + std::to_string(p - 1) + "] for p = " +
                         std::to_string(p));
  }
}

}  // namespace detail

// Asymptotic test of H_{0r} evaluated on an existing fit.
inline TestResult asymptotic_test(const SbssSolution& sol, const KernelSet& kernels, int r) {
  detail::check_rank(sol.p(), r);
  if (!kernels.disjoint_supports) {
    throw OverlappingKernelSupports(
        "kernel supports overlap: the chi-square null does not apply; use a bootstrap method");
  }
  TestResult res;
  res.r = r;
  res.stat = statistic(sol, r);
  const int k = kernels.k();
  const Index p = sol.p();
  if (sol.renormalized) {
    const int df = chi2_test_df(p, r, k);
    res.p_value = chi2_sf(res.stat, static_cast<double>(df));
    res.null_model = ChiSquareNull{df};
    res.method = "asym";
  } else {
    const int df_each = static_cast<int>((p - r) * (p - r + 1) / 2);
    WeightedChiSquareNull null{sol.kernel_normalizations, df_each, false};
    try {
      res.p_value = weighted_chi2_pvalue(res.stat, null.weights, df_each);
      res.method = "asym-weighted";
    } catch (const QuadratureFailure&) {
      res.p_value = weighted_chi2_pvalue_moment(res.stat, null.weights, df_each);
      null.moment_matched = true;
      res.method = "asym-weighted-moment";
    }
    res.null_model = std::move(null);
  }
  return res;
}

// Fit-and-test in one call.
inline TestResult asymptotic_test(const SpatialSample& sample, const KernelSet& kernels, int r,
                                  const TestOptions& opt = {}) {
  detail::check_rank(sample.p(), r);
  detail::check_test_kernels(kernels, opt.allow_ball);
  if (!kernels.disjoint_supports) {
    throw OverlappingKernelSupports(
        "kernel supports overlap: the chi-square null does not apply; use a bootstrap method");
  }
  FitOptions fopt;
  fopt.centered = opt.centered;
  fopt.renormalized = !opt.unnormalized;
  fopt.jd = opt.jd;
  SbssSolution sol = fit(sample, kernels, fopt);
  return asymptotic_test(sol, kernels, r);
}

}  // namespace sbss
