#pragma once

// Spatial substrate: validated location sets, lattice detection, and
// kernel-driven neighbor search (uniform spatial hash with a brute-force
// path for small n).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "sbss/errors.hpp"

namespace sbss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using IntMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;

namespace detail {

// Compensated (Kahan) scalar accumulator for long double sums over pairs.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    double y = v - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

struct CellKey {
  std::array<std::int64_t, 3> c{0, 0, 0};
  bool operator==(const CellKey& o) const { return c == o.c; }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (std::int64_t v : k.c) {
      std::uint64_t z = static_cast<std::uint64_t>(v) + h;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      h = z ^ (z >> 31);
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace detail

// Immutable set of n distinct sampling locations in d in {1, 2, 3}.
// Exact duplicates are a hard error: coincident points break the kernel
// normalization and the block bootstrap.
class LocationSet {
 public:
  explicit LocationSet(Matrix coords) : coords_(std::move(coords)) {
    if (coords_.rows() < 1) throw ValidationError("LocationSet: needs at least one location");
    if (coords_.cols() < 1 || coords_.cols() > 3) {
      throw ValidationError("LocationSet: spatial dimension must be 1, 2 or 3 (got " +
                            std::to_string(coords_.cols()) + ")");
    }
    if (!coords_.allFinite()) throw ValidationError("LocationSet: coordinates must be finite");
    check_distinct();
  }

  Index n() const { return coords_.rows(); }
  int dim() const { return static_cast<int>(coords_.cols()); }
  const Matrix& coords() const { return coords_; }

  // Smallest distance between two distinct locations; O(n^2).
  double min_pairwise_distance() const {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < n(); ++i) {
      for (Index j = i + 1; j < n(); ++j) {
        best = std::min(best, (coords_.row(i) - coords_.row(j)).norm());
      }
    }
    return best;
  }

 private:
  void check_distinct() const {
    const Index n_pts = coords_.rows();
    const int d = static_cast<int>(coords_.cols());
    std::vector<Index> order(static_cast<std::size_t>(n_pts));
    for (Index i = 0; i < n_pts; ++i) order[static_cast<std::size_t>(i)] = i;
    auto less = [&](Index a, Index b) {
      for (int k = 0; k < d; ++k) {
        if (coords_(a, k) != coords_(b, k)) return coords_(a, k) < coords_(b, k);
      }
      return false;
    };
    std::sort(order.begin(), order.end(), less);
    for (std::size_t s = 1; s < order.size(); ++s) {
      Index a = order[s - 1];
      Index b = order[s];
      if (coords_.row(a) == coords_.row(b)) {
        throw ValidationError("LocationSet: locations " + std::to_string(std::min(a, b)) +
                              " and " + std::to_string(std::max(a, b)) + " coincide");
      }
    }
  }

  Matrix coords_;
};

// Result of lattice detection: when is_regular, every location equals
// origin + spacing * integer_coords.row(i) within 1e-9 * spacing.
struct GridDescriptor {
  bool is_regular = false;
  Vector origin;
  double spacing = 0.0;
  IntMatrix integer_coords;
};

// Detects a shared uniform lattice. The candidate spacing is the smallest
// positive successive coordinate difference pooled over all dimensions;
// the set is regular iff every coordinate reconstructs from it. A finer
// implied lattice (differences that are not multiples of the smallest one)
// is rejected.
inline GridDescriptor detect_grid(const LocationSet& loc) {
  const Matrix& c = loc.coords();
  const Index n = c.rows();
  const int d = static_cast<int>(c.cols());

  GridDescriptor gd;
  gd.origin = c.colwise().minCoeff().transpose();

  double spacing = std::numeric_limits<double>::infinity();
  std::vector<double> vals(static_cast<std::size_t>(n));
  for (int k = 0; k < d; ++k) {
    for (Index i = 0; i < n; ++i) vals[static_cast<std::size_t>(i)] = c(i, k);
    std::sort(vals.begin(), vals.end());
    for (std::size_t s = 1; s < vals.size(); ++s) {
      double diff = vals[s] - vals[s - 1];
      if (diff > 0.0) spacing = std::min(spacing, diff);
    }
  }
  if (!std::isfinite(spacing)) return gd;

  const double tol = 1e-9 * spacing;
  IntMatrix ints(n, d);
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double q = (c(i, k) - gd.origin(k)) / spacing;
      auto r = std::llround(q);
      if (r < 0 || r > (1LL << 40)) return gd;
      if (std::abs(c(i, k) - (gd.origin(k) + spacing * static_cast<double>(r))) > tol) return gd;
      ints(i, k) = r;
    }
  }
  gd.is_regular = true;
  gd.spacing = spacing;
  gd.integer_coords = std::move(ints);
  return gd;
}

// Ordered pair (i, j) with the kernel value at s_i - s_j.
struct WeightedPair {
  Index i;
  Index j;
  double weight;
};

// All ordered pairs (including i == j) with non-zero predicate value,
// sorted row-major by (i, j). The predicate supplies f(lag) and a
// support_radius() beyond which it vanishes; radius <= 0 means the
// predicate is non-zero only at lag 0.
template <class Predicate>
std::vector<WeightedPair> neighbor_pairs(const LocationSet& loc, const Predicate& f) {
  const Matrix& c = loc.coords();
  const Index n = c.rows();
  const int d = static_cast<int>(c.cols());
  const double radius = f.support_radius();
  std::vector<WeightedPair> out;

  if (!(radius > 0.0)) {
    Vector zero = Vector::Zero(d);
    double w0 = f(zero);
    if (w0 != 0.0) {
      out.reserve(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) out.push_back({i, i, w0});
    }
    return out;
  }

  Vector lag(d);
  if (n < 256) {
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        lag = (c.row(i) - c.row(j)).transpose();
        double w = f(lag);
        if (w != 0.0) out.push_back({i, j, w});
      }
    }
    return out;
  }

  // Uniform hash grid with cell edge = support radius: any pair within the
  // radius lives in adjacent cells.
  auto cell_of = [&](Index i) {
    detail::CellKey key;
    for (int k = 0; k < d; ++k) {
      key.c[static_cast<std::size_t>(k)] =
          static_cast<std::int64_t>(std::floor(c(i, k) / radius));
    }
    return key;
  };
  std::unordered_map<detail::CellKey, std::vector<Index>, detail::CellKeyHash> cells;
  cells.reserve(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) cells[cell_of(i)].push_back(i);

  std::vector<std::pair<Index, double>> row;
  const int span = (d >= 1 ? 3 : 1) * (d >= 2 ? 3 : 1) * (d >= 3 ? 3 : 1);
  for (Index i = 0; i < n; ++i) {
    row.clear();
    detail::CellKey base = cell_of(i);
    for (int s = 0; s < span; ++s) {
      detail::CellKey probe = base;
      int rem = s;
      for (int k = 0; k < d; ++k) {
        probe.c[static_cast<std::size_t>(k)] += (rem % 3) - 1;
        rem /= 3;
      }
      auto it = cells.find(probe);
      if (it == cells.end()) continue;
      for (Index j : it->second) {
        lag = (c.row(i) - c.row(j)).transpose();
        double w = f(lag);
        if (w != 0.0) row.emplace_back(j, w);
      }
    }
    std::sort(row.begin(), row.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [j, w] : row) out.push_back({i, j, w});
  }
  return out;
}

namespace detail {

// Integer lag offsets of the m-way lag-h neighborhood: h * v on m chosen
// axes, v in {-1, +1}^m. Deterministic order: axis subsets by increasing
// bitmask, then sign patterns in binary order.
inline std::vector<IntVector> lag_offsets(int d, int m, int h) {
  std::vector<IntVector> offsets;
  for (int mask = 1; mask < (1 << d); ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != m) continue;
    std::vector<int> axes;
    for (int k = 0; k < d; ++k) {
      if (mask & (1 << k)) axes.push_back(k);
    }
    for (int signs = 0; signs < (1 << m); ++signs) {
      IntVector off = IntVector::Zero(d);
      for (int t = 0; t < m; ++t) {
        off(axes[static_cast<std::size_t>(t)]) = (signs & (1 << t)) ? h : -h;
      }
      offsets.push_back(off);
    }
  }
  return offsets;
}

inline CellKey int_key(const IntMatrix& ints, Index i) {
  CellKey key;
  for (int k = 0; k < ints.cols(); ++k) key.c[static_cast<std::size_t>(k)] = ints(i, k);
  return key;
}

using LatticeIndex = std::unordered_map<CellKey, Index, CellKeyHash>;

inline LatticeIndex lattice_index(const IntMatrix& ints) {
  LatticeIndex map;
  map.reserve(static_cast<std::size_t>(ints.rows()));
  for (Index i = 0; i < ints.rows(); ++i) map.emplace(int_key(ints, i), i);
  return map;
}

}  // namespace detail

// Indices of the m-way lag-h neighbors of `center` on a detected lattice,
// sorted ascending. At most C(d, m) * 2^m neighbors exist; absent lattice
// points are skipped.
inline std::vector<Index> grid_neighbors(const LocationSet& loc, const GridDescriptor& gd,
                                         Index center, int m, int h) {
  if (!gd.is_regular) throw NotRegular("grid_neighbors: locations are not on a uniform lattice");
  const int d = loc.dim();
  if (m < 1 || m > d) {
    throw ValidationError("grid_neighbors: m must lie in [1, " + std::to_string(d) + "]");
  }
  if (h < 1) throw ValidationError("grid_neighbors: h must be a positive integer");
  if (center < 0 || center >= loc.n()) throw ValidationError("grid_neighbors: center index out of range");

  auto map = detail::lattice_index(gd.integer_coords);
  std::vector<Index> result;
  for (const IntVector& off : detail::lag_offsets(d, m, h)) {
    detail::CellKey key = detail::int_key(gd.integer_coords, center);
    for (int k = 0; k < d; ++k) key.c[static_cast<std::size_t>(k)] += off(k);
    auto it = map.find(key);
    if (it != map.end()) result.push_back(it->second);
  }
  std::sort(result.begin(), result.end());
  return result;
}

inline std::vector<Index> grid_neighbors(const LocationSet& loc, Index center, int m, int h) {
  return grid_neighbors(loc, detect_grid(loc), center, m, h);
}

}  // namespace sbss
