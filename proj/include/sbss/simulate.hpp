#pragma once

// Simulation of the validation worlds: Matern Gaussian random fields plus
// white-noise channels on uniform, skewed, or lattice coordinate patterns,
// mixed through an invertible matrix. Field draws factor each distinct
// Matern correlation matrix once per location set and reuse the factor.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "sbss/errors.hpp"
#include "sbss/geometry.hpp"
#include "sbss/rng.hpp"
#include "sbss/sample.hpp"

namespace sbss {

struct MaternParams {
  double nu;
  double phi;
};

// Matern correlation 2^(1-nu)/Gamma(nu) * (h/phi)^nu * K_nu(h/phi), with the
// continuity value 1 at h = 0.
inline double matern(double h, const MaternParams& params) {
  if (!(params.nu > 0.0) || !(params.phi > 0.0)) {
    throw ValidationError("matern: nu and phi must be positive");
  }
  if (!(h >= 0.0)) throw ValidationError("matern: lag must be non-negative");
  const double x = h / params.phi;
  if (x < 1e-10) return 1.0;
  const double scale = std::pow(2.0, 1.0 - params.nu) / std::tgamma(params.nu);
  return scale * std::pow(x, params.nu) * std::cyl_bessel_k(params.nu, x);
}

enum class CoordPattern { Uniform, BetaSkewed, Grid };

// Coordinate patterns on the square [0, n_e]^2. Uniform and BetaSkewed draw
// n_e^2 random points (the skewed pattern uses Beta(2,5) x-coordinates);
// Grid emits the full (n_e+1)^2 integer lattice. Random patterns redraw any
// exact duplicate point.
inline LocationSet gen_coords(CoordPattern pattern, int n_e, Rng& rng) {
  if (n_e < 2) throw ValidationError("gen_coords: domain edge must be >= 2");
  const double edge = static_cast<double>(n_e);
  if (pattern == CoordPattern::Grid) {
    const Index side = n_e + 1;
    Matrix c(side * side, 2);
    Index row = 0;
    for (Index x = 0; x < side; ++x) {
      for (Index y = 0; y < side; ++y) {
        c(row, 0) = static_cast<double>(x);
        c(row, 1) = static_cast<double>(y);
        ++row;
      }
    }
    return LocationSet(std::move(c));
  }

  const Index n = static_cast<Index>(n_e) * n_e;
  Matrix c(n, 2);
  struct PairHash {
    std::size_t operator()(const std::pair<double, double>& p) const {
      std::uint64_t a, b;
      std::memcpy(&a, &p.first, 8);
      std::memcpy(&b, &p.second, 8);
      std::uint64_t h = a * 0x9e3779b97f4a7c15ull ^ b;
      return static_cast<std::size_t>(splitmix64(h));
    }
  };
  std::unordered_set<std::pair<double, double>, PairHash> seen;
  seen.reserve(static_cast<std::size_t>(n) * 2);
  for (Index i = 0; i < n; ++i) {
    for (;;) {
      const double x = pattern == CoordPattern::BetaSkewed ? edge * rng.beta(2, 5)
                                                           : edge * rng.uniform01();
      const double y = edge * rng.uniform01();
      if (seen.insert({x, y}).second) {
        c(i, 0) = x;
        c(i, 1) = y;
        break;
      }
    }
  }
  return LocationSet(std::move(c));
}

struct LatentModel {
  std::vector<MaternParams> signals;
  int noise_count = 0;
  Matrix mixing;  // empty = identity
  Vector mean;    // empty = zero

  int p() const { return static_cast<int>(signals.size()) + noise_count; }
};

inline double condition_number(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(sv.size() - 1) <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / sv(sv.size() - 1);
}

// Draws SpatialSamples from a LatentModel on a fixed location set. Each
// distinct (nu, phi) pair's n x n correlation matrix is factored once (lower
// Cholesky, with a 1e-10 diagonal jitter retry).
class FieldSampler {
 public:
  FieldSampler(const LocationSet& loc, LatentModel model)
      : loc_(loc), model_(std::move(model)) {
    const Index n = loc_.n();
    const int p = model_.p();
    if (p < 1) throw ValidationError("FieldSampler: model dimension must be >= 1");
    if (model_.noise_count < 0) throw ValidationError("FieldSampler: negative noise count");
    if (n > 5000) {
      throw TooLarge("FieldSampler: " + std::to_string(n) +
                     " locations exceed the dense factorization limit of 5000");
    }
    if (model_.mixing.size() != 0) {
      if (model_.mixing.rows() != p || model_.mixing.cols() != p) {
        throw ValidationError("FieldSampler: mixing matrix must be p x p");
      }
      Eigen::FullPivLU<Matrix> lu(model_.mixing);
      if (!lu.isInvertible()) throw ValidationError("FieldSampler: mixing matrix is singular");
    }
    if (model_.mean.size() != 0 && model_.mean.size() != p) {
      throw ValidationError("FieldSampler: mean vector must have length p");
    }

    factor_of_signal_.resize(model_.signals.size());
    std::unordered_map<std::uint64_t, std::size_t> cache;
    for (std::size_t a = 0; a < model_.signals.size(); ++a) {
      const MaternParams& mp = model_.signals[a];
      if (!(mp.nu > 0.0) || !(mp.phi > 0.0)) {
        throw ValidationError("FieldSampler: nu and phi must be positive");
      }
      std::uint64_t key = 0;
      std::memcpy(&key, &mp.nu, 8);
      std::uint64_t lo = 0;
      std::memcpy(&lo, &mp.phi, 8);
      key = splitmix64(key) ^ lo;
      auto it = cache.find(key);
      if (it != cache.end()) {
        factor_of_signal_[a] = it->second;
        continue;
      }
      factors_.push_back(factor_correlation(mp));
      factor_of_signal_[a] = factors_.size() - 1;
      cache.emplace(key, factors_.size() - 1);
    }
  }

  const LocationSet& locations() const { return loc_; }
  const LatentModel& model() const { return model_; }

  // Latent channels in model order (signals, then noise), each channel's n
  // normal deviates drawn consecutively.
  Matrix draw_latent(Rng& rng) const {
    const Index n = loc_.n();
    const int p = model_.p();
    Matrix z(n, p);
    Vector e(n);
    for (std::size_t a = 0; a < model_.signals.size(); ++a) {
      for (Index i = 0; i < n; ++i) e(i) = rng.normal();
      z.col(static_cast<Index>(a)) = factors_[factor_of_signal_[a]] * e;
    }
    for (int a = 0; a < model_.noise_count; ++a) {
      const Index c = static_cast<Index>(model_.signals.size()) + a;
      for (Index i = 0; i < n; ++i) z(i, c) = rng.normal();
    }
    return z;
  }

  SpatialSample draw(Rng& rng) const {
    Matrix z = draw_latent(rng);
    Matrix x = model_.mixing.size() == 0 ? std::move(z) : Matrix(z * model_.mixing.transpose());
    if (model_.mean.size() != 0) x.rowwise() += model_.mean.transpose();
    return SpatialSample{loc_, std::move(x)};
  }

 private:
  Matrix factor_correlation(const MaternParams& mp) const {
    const Index n = loc_.n();
    const Matrix& c = loc_.coords();
    Matrix corr(n, n);
    for (Index i = 0; i < n; ++i) {
      corr(i, i) = 1.0;
      for (Index j = 0; j < i; ++j) {
        const double v = matern((c.row(i) - c.row(j)).norm(), mp);
        corr(i, j) = v;
        corr(j, i) = v;
      }
    }
    Eigen::LLT<Matrix> llt(corr);
    if (llt.info() != Eigen::Success) {
      corr.diagonal().array() += 1e-10;
      llt.compute(corr);
      if (llt.info() != Eigen::Success) {
        throw FactorizationFailure(
            "FieldSampler: correlation matrix is not positive definite (nu=" +
            std::to_string(mp.nu) + ", phi=" + std::to_string(mp.phi) + ")");
      }
    }
    return llt.matrixL();
  }

  LocationSet loc_;
  LatentModel model_;
  std::vector<Matrix> factors_;
  std::vector<std::size_t> factor_of_signal_;
};

inline SpatialSample sample_field(const LocationSet& loc, const LatentModel& model, Rng& rng) {
  return FieldSampler(loc, model).draw(rng);
}

struct VariogramBin {
  double lo;
  double hi;
};

struct VariogramPoint {
  double h_mid;
  double gamma;
  Index pair_count;
};

// Classical variogram estimator over unordered pairs: for each bin (lo, hi],
// gamma = sum (v_i - v_j)^2 / (2 count). Empty bins report gamma 0.
inline std::vector<VariogramPoint> empirical_variogram(const Vector& values,
                                                       const LocationSet& loc,
                                                       const std::vector<VariogramBin>& bins) {
  if (values.size() != loc.n()) {
    throw ValidationError("empirical_variogram: one value per location required");
  }
  if (bins.empty()) throw ValidationError("empirical_variogram: no bins given");
  std::vector<std::size_t> order(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    if (!(bins[b].hi > bins[b].lo)) {
      throw ValidationError("empirical_variogram: bin upper edge must exceed lower edge");
    }
    order[b] = b;
  }
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return bins[a].lo < bins[b].lo; });
  for (std::size_t b = 1; b < order.size(); ++b) {
    if (bins[order[b]].lo < bins[order[b - 1]].hi - 1e-12) {
      throw ValidationError("empirical_variogram: bins overlap");
    }
  }

  std::vector<detail::KahanSum> sums(bins.size());
  std::vector<Index> counts(bins.size(), 0);
  const Matrix& c = loc.coords();
  const Index n = loc.n();
  std::vector<double> lows(order.size());
  for (std::size_t b = 0; b < order.size(); ++b) lows[b] = bins[order[b]].lo;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const double h = (c.row(i) - c.row(j)).norm();
      auto it = std::upper_bound(lows.begin(), lows.end(), h);
      if (it == lows.begin()) continue;
      const std::size_t b = order[static_cast<std::size_t>(it - lows.begin()) - 1];
      if (h <= bins[b].lo || h > bins[b].hi) continue;
      const double d = values(i) - values(j);
      sums[b].add(d * d);
      ++counts[b];
    }
  }

  std::vector<VariogramPoint> out;
  out.reserve(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    VariogramPoint pt;
    pt.h_mid = 0.5 * (bins[b].lo + bins[b].hi);
    pt.pair_count = counts[b];
    pt.gamma = counts[b] == 0 ? 0.0 : sums[b].value() / (2.0 * static_cast<double>(counts[b]));
    out.push_back(pt);
  }
  return out;
}

}  // namespace sbss
