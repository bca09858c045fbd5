#pragma once

// Signal-dimension estimation on top of the rank tests. The search
// strategies are generic over a test function r -> p-value, so they work
// with asymptotic and bootstrap tests alike. Both searches treat the tests
// as a monotone oracle: rejection means the signal dimension exceeds r.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sbss/errors.hpp"
#include "sbss/special.hpp"

namespace sbss {

struct TraceEntry {
  int r;
  double value;  // p-value (search strategies) or statistic (threshold)
  bool rejected;
};

struct EstimateResult {
  int q_hat = 0;
  std::vector<TraceEntry> trace;
  std::string strategy;
  std::string criterion;  // "alpha=..." or "c_n=..."
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0 || !std::isfinite(alpha)) {
    throw ValidationError("alpha must lie in (0, 1]");
  }
}

inline std::string format_alpha(double alpha) {
  std::string s = std::to_string(alpha);
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return "alpha=" + s;
}

}  // namespace detail

// Binary search for the smallest non-rejected rank. The bracket invariant is
// lower = largest rank known rejected (or 0 untested), upper = smallest rank
// known accepted (or p untested). When the bracket closes on (0, 1) the rank
// 0 hypothesis is tested explicitly unless include_zero is false.
inline EstimateResult divide_conquer(const std::function<double(int)>& test_fn, int p,
                                     double alpha, bool include_zero = true) {
  if (p < 1) throw ValidationError("divide_conquer: p must be >= 1");
  detail::check_alpha(alpha);
  EstimateResult res;
  res.strategy = "divide-conquer";
  res.criterion = detail::format_alpha(alpha);

  int lower = 0;
  int upper = p;
  while (upper - lower > 1) {
    const int middle = lower + (upper - lower) / 2;
    const double pv = test_fn(middle);
    const bool rejected = pv < alpha;
    res.trace.push_back({middle, pv, rejected});
    if (rejected) {
      lower = middle;
    } else {
      upper = middle;
    }
  }
  if (lower == 0 && upper == 1 && include_zero) {
    const double pv = test_fn(0);
    const bool rejected = pv < alpha;
    res.trace.push_back({0, pv, rejected});
    res.q_hat = rejected ? 1 : 0;
  } else {
    res.q_hat = upper;
  }
  return res;
}

// Sequential alternative: accept the first rank whose p-value clears alpha.
inline EstimateResult forward_estimate(const std::function<double(int)>& test_fn, int p,
                                       double alpha, bool include_zero = true) {
  if (p < 1) throw ValidationError("forward_estimate: p must be >= 1");
  detail::check_alpha(alpha);
  EstimateResult res;
  res.strategy = "forward";
  res.criterion = detail::format_alpha(alpha);
  res.q_hat = p;
  for (int r = include_zero ? 0 : 1; r < p; ++r) {
    const double pv = test_fn(r);
    const bool rejected = pv < alpha;
    res.trace.push_back({r, pv, rejected});
    if (!rejected) {
      res.q_hat = r;
      break;
    }
  }
  return res;
}

// Threshold estimator: q_hat = min{r in 1..p-1 : t_r <= c_n}, min empty = p.
// statistics holds t_1..t_{p-1} from a single fit.
inline int threshold_estimate(const std::vector<double>& statistics,
                              const std::vector<double>& c_n) {
  const int p = static_cast<int>(statistics.size()) + 1;
  if (statistics.empty()) throw ValidationError("threshold_estimate: need t_1..t_{p-1}");
  if (c_n.size() != statistics.size()) {
    throw ValidationError("threshold_estimate: one threshold per statistic required");
  }
  for (double c : c_n) {
    if (!(c > 0.0)) throw ValidationError("threshold_estimate: thresholds must be positive");
  }
  for (int r = 1; r < p; ++r) {
    if (statistics[static_cast<std::size_t>(r - 1)] <= c_n[static_cast<std::size_t>(r - 1)]) {
      return r;
    }
  }
  return p;
}

inline int threshold_estimate(const std::vector<double>& statistics, double c_n) {
  return threshold_estimate(statistics,
                            std::vector<double>(statistics.size(), c_n));
}

// Default threshold sequence: chi-square quantiles at level 1 - alpha with
// the rank-dependent degrees of freedom k (p-r)(p-r+1)/2, which makes the
// threshold rule agree with forward chi-square testing.
inline std::vector<double> default_thresholds(int p, int k, double alpha) {
  if (p < 2) throw ValidationError("default_thresholds: p must be >= 2");
  if (k < 1) throw ValidationError("default_thresholds: k must be >= 1");
  detail::check_alpha(alpha);
  std::vector<double> c;
  c.reserve(static_cast<std::size_t>(p - 1));
  for (int r = 1; r < p; ++r) {
    const double df = static_cast<double>(k) * (p - r) * (p - r + 1) / 2.0;
    c.push_back(chi2_quantile(1.0 - alpha, df));
  }
  return c;
}

// EstimateResult wrapper used by the CLI; criterion describes the threshold.
inline EstimateResult threshold_estimate_result(const std::vector<double>& statistics,
                                                const std::vector<double>& c_n,
                                                std::string criterion) {
  EstimateResult res;
  res.strategy = "threshold";
  res.criterion = std::move(criterion);
  res.q_hat = threshold_estimate(statistics, c_n);
  const int p = static_cast<int>(statistics.size()) + 1;
  for (int r = 1; r < p; ++r) {
    const double t = statistics[static_cast<std::size_t>(r - 1)];
    res.trace.push_back({r, t, t > c_n[static_cast<std::size_t>(r - 1)]});
  }
  return res;
}

}  // namespace sbss
