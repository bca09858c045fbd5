#pragma once

// Kernel-weighted local covariance matrices. The renormalized estimator is
//   M(f) = 1 / (n sqrt(F_{n,f})) * sum_{i,j} f(s_i - s_j) x(s_i) x(s_j)^T,
// with x empirically centered by default and F_{n,f0} = 1 for the identity
// kernel. Pair sums use compensated accumulation in a fixed order, so
// results are bit-stable. ScatterPlan precomputes the pair lists once per
// location set; bootstrap refits on unchanged locations reuse it.

#include <utility>
#include <vector>

#include "sbss/errors.hpp"
#include "sbss/geometry.hpp"
#include "sbss/kernels.hpp"
#include "sbss/sample.hpp"

namespace sbss {

struct ScatterMatrix {
  Matrix m;
  Kernel kernel;
  double normalization;  // F_{n,f}
  bool centered;
};

class ScatterPlan {
 public:
  ScatterPlan(const LocationSet& loc, std::vector<Kernel> kernels)
      : n_(loc.n()), kernels_(std::move(kernels)) {
    pairs_.reserve(kernels_.size());
    norms_.reserve(kernels_.size());
    for (const Kernel& k : kernels_) {
      if (k.family() == Kernel::Family::Identity) {
        pairs_.emplace_back();
        norms_.push_back(1.0);
        continue;
      }
      pairs_.push_back(detail::kernel_pairs(loc, k));
      detail::KahanSum acc;
      for (const WeightedPair& pr : pairs_.back()) acc.add(pr.weight * pr.weight);
      double f = acc.value() / static_cast<double>(n_);
      if (!(f > 0.0)) {
        throw DegenerateKernel("kernel " + k.spec_string() +
                               " captures no location pairs (normalization is zero)");
      }
      norms_.push_back(f);
    }
  }

  Index n() const { return n_; }
  int k() const { return static_cast<int>(kernels_.size()); }
  const std::vector<Kernel>& kernels() const { return kernels_; }
  const std::vector<double>& normalizations() const { return norms_; }

  // M(f_idx) for values observed on the planned location set.
  ScatterMatrix scatter(const Matrix& values, int idx, bool centered = true) const {
    check_values(values);
    const Kernel& kernel = kernels_.at(static_cast<std::size_t>(idx));
    if (kernel.family() == Kernel::Family::Identity) {
      return identity_scatter_impl(values, centered, kernel);
    }
    const Index p = values.cols();
    Matrix centered_vals = center(values, centered);
    Matrix sum = Matrix::Zero(p, p);
    Matrix carry = Matrix::Zero(p, p);
    for (const WeightedPair& pr : pairs_[static_cast<std::size_t>(idx)]) {
      for (Index a = 0; a < p; ++a) {
        const double xa = pr.weight * centered_vals(pr.i, a);
        for (Index b = 0; b < p; ++b) {
          const double v = xa * centered_vals(pr.j, b);
          const double y = v - carry(a, b);
          const double t = sum(a, b) + y;
          carry(a, b) = (t - sum(a, b)) - y;
          sum(a, b) = t;
        }
      }
    }
    const double f = norms_[static_cast<std::size_t>(idx)];
    sum /= static_cast<double>(n_) * std::sqrt(f);
    sum = ((sum + sum.transpose()) / 2.0).eval();
    return {std::move(sum), kernel, f, centered};
  }

  // M(f0): the plain (co)variance matrix of the values.
  ScatterMatrix identity_scatter(const Matrix& values, bool centered = true) const {
    check_values(values);
    return identity_scatter_impl(values, centered, Kernel::identity());
  }

 private:
  void check_values(const Matrix& values) const {
    if (values.rows() != n_) {
      throw ValidationError("ScatterPlan: values have " + std::to_string(values.rows()) +
                            " rows, expected " + std::to_string(n_));
    }
  }

  static Matrix center(const Matrix& values, bool centered) {
    if (!centered) return values;
    return values.rowwise() - values.colwise().mean();
  }

  ScatterMatrix identity_scatter_impl(const Matrix& values, bool centered,
                                      const Kernel& kernel) const {
    Matrix centered_vals = center(values, centered);
    Matrix m = centered_vals.transpose() * centered_vals / static_cast<double>(n_);
    m = ((m + m.transpose()) / 2.0).eval();
    return {std::move(m), kernel, 1.0, centered};
  }

  Index n_;
  std::vector<Kernel> kernels_;
  std::vector<std::vector<WeightedPair>> pairs_;
  std::vector<double> norms_;
};

// One-off local covariance for a sample.
inline ScatterMatrix scatter(const SpatialSample& sample, const Kernel& kernel,
                             bool centered = true) {
  ScatterPlan plan(sample.loc, {kernel});
  return plan.scatter(sample.values, 0, centered);
}

// Lattice fast path for the m-way lag-h kernel: neighbors are found by
// shifting integer index arrays instead of distance search. Matches the
// generic path exactly up to floating-point summation order; the
// normalization 1 / sqrt(n * sum_i |N_i|) equals 1 / (n sqrt(F_{n,f})).
inline ScatterMatrix scatter_grid(const SpatialSample& sample, int m, int h,
                                  bool centered = true) {
  const int d = sample.loc.dim();
  if (m < 1 || m > d) {
    throw ValidationError("scatter_grid: m must lie in [1, " + std::to_string(d) + "]");
  }
  if (h < 1) throw ValidationError("scatter_grid: h must be a positive integer");
  GridDescriptor gd = detect_grid(sample.loc);
  if (!gd.is_regular) throw NotRegular("scatter_grid: locations are not on a uniform lattice");

  const Index n = sample.n();
  const Index p = sample.p();
  const Matrix centered_vals =
      centered ? Matrix(sample.values.rowwise() - sample.values.colwise().mean())
               : sample.values;

  // Dense index array over the lattice bounding box (hash fallback when the
  // box is much larger than the point count).
  IntVector lo = gd.integer_coords.colwise().minCoeff().transpose();
  IntVector hi = gd.integer_coords.colwise().maxCoeff().transpose();
  IntVector extent = hi - lo + IntVector::Ones(d);
  std::int64_t volume = 1;
  bool dense = true;
  for (int k = 0; k < d; ++k) {
    if (extent(k) > (1LL << 40) / std::max<std::int64_t>(volume, 1)) {
      dense = false;
      break;
    }
    volume *= extent(k);
  }
  dense = dense && volume <= 64 * static_cast<std::int64_t>(n) + 4096;

  std::vector<Index> cell;
  detail::LatticeIndex map;
  auto linear = [&](const IntVector& q) {
    std::int64_t idx = 0;
    for (int k = 0; k < d; ++k) idx = idx * extent(k) + (q(k) - lo(k));
    return idx;
  };
  if (dense) {
    cell.assign(static_cast<std::size_t>(volume), -1);
    IntVector q(d);
    for (Index i = 0; i < n; ++i) {
      q = gd.integer_coords.row(i).transpose();
      cell[static_cast<std::size_t>(linear(q))] = i;
    }
  } else {
    map = detail::lattice_index(gd.integer_coords);
  }

  Matrix sum = Matrix::Zero(p, p);
  Matrix carry = Matrix::Zero(p, p);
  std::int64_t pair_count = 0;
  IntVector q(d);
  for (const IntVector& off : detail::lag_offsets(d, m, h)) {
    for (Index i = 0; i < n; ++i) {
      bool inside = true;
      for (int k = 0; k < d; ++k) {
        q(k) = gd.integer_coords(i, k) + off(k);
        if (q(k) < lo(k) || q(k) > hi(k)) {
          inside = false;
          break;
        }
      }
      if (!inside) continue;
      Index j;
      if (dense) {
        j = cell[static_cast<std::size_t>(linear(q))];
        if (j < 0) continue;
      } else {
        detail::CellKey key;
        for (int k = 0; k < d; ++k) key.c[static_cast<std::size_t>(k)] = q(k);
        auto it = map.find(key);
        if (it == map.end()) continue;
        j = it->second;
      }
      ++pair_count;
      for (Index a = 0; a < p; ++a) {
        const double xa = centered_vals(i, a);
        for (Index b = 0; b < p; ++b) {
          const double v = xa * centered_vals(j, b);
          const double y = v - carry(a, b);
          const double t = sum(a, b) + y;
          carry(a, b) = (t - sum(a, b)) - y;
          sum(a, b) = t;
        }
      }
    }
  }

  if (pair_count == 0) {
    throw DegenerateKernel("grid-lag kernel lag:" + std::to_string(m) + ":" + std::to_string(h) +
                           " captures no location pairs (normalization is zero)");
  }
  sum /= std::sqrt(static_cast<double>(n) * static_cast<double>(pair_count));
  sum = ((sum + sum.transpose()) / 2.0).eval();
  const double f = static_cast<double>(pair_count) / static_cast<double>(n);
  return {std::move(sum), Kernel::grid_lag(m, h), f, centered};
}

}  // namespace sbss
