#pragma once

// Spatial kernels and their normalization constants. Ring and Ball act on
// lag vectors in coordinate units; GridLag is defined in lattice units and
// is paired with locations through detect_grid. The identity kernel f0
// selects only the zero lag and always has normalization 1.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sbss/errors.hpp"
#include "sbss/geometry.hpp"

namespace sbss {

class Kernel {
 public:
  enum class Family { Identity, Ring, Ball, GridLag };

  static Kernel identity() { return Kernel(Family::Identity, 0.0, 0.0); }

  // I(r1 < |s| <= r2). Vanishes at the origin whenever r1 >= 0.
  static Kernel ring(double r1, double r2) {
    if (!(r1 >= 0.0)) throw ValidationError("ring kernel: inner radius must be >= 0");
    if (!(r2 > r1)) throw ValidationError("ring kernel: outer radius must exceed inner radius");
    return Kernel(Family::Ring, r1, r2);
  }

  // I(|s| <= r). Non-zero at the origin, so not admissible in dimension
  // tests without an explicit override.
  static Kernel ball(double r) {
    if (!(r > 0.0)) throw ValidationError("ball kernel: radius must be positive");
    return Kernel(Family::Ball, r, 0.0);
  }

  // I(s in {-h, 0, h}^d with exactly m non-zero components), lattice units.
  static Kernel grid_lag(int m, int h) {
    if (m < 1 || m > 3) throw ValidationError("grid-lag kernel: m must lie in [1, 3]");
    if (h < 1) throw ValidationError("grid-lag kernel: h must be a positive integer");
    return Kernel(Family::GridLag, static_cast<double>(m), static_cast<double>(h));
  }

  Family family() const { return family_; }
  double ring_r1() const { return a_; }
  double ring_r2() const { return b_; }
  double ball_r() const { return a_; }
  int lag_m() const { return static_cast<int>(a_); }
  int lag_h() const { return static_cast<int>(b_); }

  // Kernel value at a lag vector (GridLag: lattice units).
  double operator()(const Eigen::Ref<const Vector>& lag) const {
    switch (family_) {
      case Family::Identity:
        return lag.isZero(0.0) ? 1.0 : 0.0;
      case Family::Ring: {
        double r = lag.norm();
        return (r > a_ && r <= b_) ? 1.0 : 0.0;
      }
      case Family::Ball:
        return (lag.norm() <= a_) ? 1.0 : 0.0;
      case Family::GridLag: {
        const double h = b_;
        const double tol = 1e-9 * h;
        int nonzero = 0;
        for (Index k = 0; k < lag.size(); ++k) {
          double v = std::abs(lag(k));
          if (v <= tol) continue;
          if (std::abs(v - h) <= tol) {
            ++nonzero;
          } else {
            return 0.0;
          }
        }
        return (nonzero == static_cast<int>(a_)) ? 1.0 : 0.0;
      }
    }
    return 0.0;
  }

  // Largest lag norm with non-zero value (same units as operator()).
  double support_radius() const {
    switch (family_) {
      case Family::Identity:
        return 0.0;
      case Family::Ring:
        return b_;
      case Family::Ball:
        return a_;
      case Family::GridLag:
        return b_ * std::sqrt(a_);
    }
    return 0.0;
  }

  // Condition for the chi-square theory: f(0) = 0.
  bool zero_at_origin() const {
    return family_ == Family::Ring || family_ == Family::GridLag;
  }

  std::string spec_string() const {
    std::ostringstream os;
    switch (family_) {
      case Family::Identity:
        os << "f0";
        break;
      case Family::Ring:
        os << "ring:" << a_ << ":" << b_;
        break;
      case Family::Ball:
        os << "ball:" << a_;
        break;
      case Family::GridLag:
        os << "lag:" << lag_m() << ":" << lag_h();
        break;
    }
    return os.str();
  }

 private:
  Kernel(Family f, double a, double b) : family_(f), a_(a), b_(b) {}

  Family family_;
  double a_;
  double b_;
};

inline double eval(const Kernel& k, const Eigen::Ref<const Vector>& lag) { return k(lag); }

namespace detail {

// Weighted pairs of a kernel over a location set. GridLag kernels are
// evaluated on the detected integer lattice; everything else on raw lags.
inline std::vector<WeightedPair> kernel_pairs(const LocationSet& loc, const Kernel& k) {
  if (k.family() == Kernel::Family::GridLag) {
    GridDescriptor gd = detect_grid(loc);
    if (!gd.is_regular) {
      throw NotRegular("kernel " + k.spec_string() + " requires locations on a uniform lattice");
    }
    LocationSet lattice(gd.integer_coords.cast<double>());
    return neighbor_pairs(lattice, k);
  }
  return neighbor_pairs(loc, k);
}

}  // namespace detail

// Normalization constant F_{n,f} = (1/n) sum_{i,j} f(s_i - s_j)^2.
// Exactly 1 for the identity kernel. Zero is a hard error: the kernel
// captures no pairs on this location set.
inline double normalization(const LocationSet& loc, const Kernel& k) {
  if (k.family() == Kernel::Family::Identity) return 1.0;
  detail::KahanSum acc;
  for (const WeightedPair& pr : detail::kernel_pairs(loc, k)) acc.add(pr.weight * pr.weight);
  double f = acc.value() / static_cast<double>(loc.n());
  if (!(f > 0.0)) {
    throw DegenerateKernel("kernel " + k.spec_string() +
                           " captures no location pairs (normalization is zero)");
  }
  return f;
}

// Cross normalization F_{n,f,f'} = (1/n) sum_{i,j} f(s_i - s_j) f'(s_i - s_j).
// May legitimately be zero (disjoint supports); never throws for that.
inline double cross_normalization(const LocationSet& loc, const Kernel& k1, const Kernel& k2) {
  // Pointwise kernels only meet other kernels at lag zero.
  if (k1.family() == Kernel::Family::Identity) {
    Vector zero = Vector::Zero(loc.dim());
    return k2(zero);
  }
  if (k2.family() == Kernel::Family::Identity) {
    Vector zero = Vector::Zero(loc.dim());
    return k1(zero);
  }

  const bool need_lattice = k1.family() == Kernel::Family::GridLag ||
                            k2.family() == Kernel::Family::GridLag;
  GridDescriptor gd;
  if (need_lattice) {
    gd = detect_grid(loc);
    if (!gd.is_regular) {
      throw NotRegular("grid-lag kernels require locations on a uniform lattice");
    }
  }

  // Enumerate pairs of the kernel with the smaller reach, evaluate the other
  // on the matching representation of the same lag.
  auto reach = [&](const Kernel& k) {
    double r = k.support_radius();
    return k.family() == Kernel::Family::GridLag ? r * (need_lattice ? gd.spacing : 1.0) : r;
  };
  const Kernel& a = reach(k1) <= reach(k2) ? k1 : k2;
  const Kernel& b = reach(k1) <= reach(k2) ? k2 : k1;

  const Matrix& c = loc.coords();
  detail::KahanSum acc;
  Vector lag(loc.dim());
  Vector lat(loc.dim());
  for (const WeightedPair& pr : detail::kernel_pairs(loc, a)) {
    lag = (c.row(pr.i) - c.row(pr.j)).transpose();
    double wb;
    if (b.family() == Kernel::Family::GridLag) {
      lat = (gd.integer_coords.row(pr.i) - gd.integer_coords.row(pr.j)).cast<double>().transpose();
      wb = b(lat);
    } else {
      wb = b(lag);
    }
    acc.add(pr.weight * wb);
  }
  return acc.value() / static_cast<double>(loc.n());
}

// Exact support disjointness where decidable. Ring intervals are half-open
// (r1, r2], so adjacent rings are disjoint; GridLag supports are finite lag
// sets determined by (m, h). Mixed Ring/Ball vs GridLag pairs live in
// different units and are conservatively reported as overlapping.
inline bool supports_disjoint(const Kernel& a, const Kernel& b) {
  using F = Kernel::Family;
  if (a.family() == F::Identity) return b.zero_at_origin();
  if (b.family() == F::Identity) return a.zero_at_origin();
  if (a.family() == F::GridLag && b.family() == F::GridLag) {
    return a.lag_m() != b.lag_m() || a.lag_h() != b.lag_h();
  }
  if (a.family() == F::GridLag || b.family() == F::GridLag) return false;

  auto interval = [](const Kernel& k) {
    if (k.family() == F::Ring) return std::pair<double, double>(k.ring_r1(), k.ring_r2());
    return std::pair<double, double>(-1.0, k.ball_r());  // ball includes lag 0
  };
  auto [a1, a2] = interval(a);
  auto [b1, b2] = interval(b);
  // Half-open intervals (lo, hi] intersect iff max(lo) < min(hi).
  return std::min(a2, b2) <= std::max(a1, b1);
}

// An ordered set of k >= 1 test kernels plus the pairwise-disjointness
// verdict that selects the asymptotic null.
struct KernelSet {
  std::vector<Kernel> kernels;
  bool disjoint_supports = true;

  static KernelSet make(std::vector<Kernel> ks) {
    if (ks.empty()) throw ValidationError("KernelSet: at least one kernel required");
    for (const Kernel& k : ks) {
      if (k.family() == Kernel::Family::Identity) {
        throw ValidationError("KernelSet: the identity kernel f0 is implicit and cannot be a test kernel");
      }
    }
    KernelSet set;
    set.kernels = std::move(ks);
    for (std::size_t i = 0; i < set.kernels.size() && set.disjoint_supports; ++i) {
      for (std::size_t j = i + 1; j < set.kernels.size(); ++j) {
        if (!supports_disjoint(set.kernels[i], set.kernels[j])) {
          set.disjoint_supports = false;
          break;
        }
      }
    }
    return set;
  }

  int k() const { return static_cast<int>(kernels.size()); }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline double parse_double(const std::string& tok, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw ValidationError(what + ": '" + tok + "' is not a number");
  }
  if (used != tok.size()) throw ValidationError(what + ": '" + tok + "' is not a number");
  return v;
}

inline int parse_int(const std::string& tok, const std::string& what) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(tok, &used);
  } catch (const std::exception&) {
    throw ValidationError(what + ": '" + tok + "' is not an integer");
  }
  if (used != tok.size()) throw ValidationError(what + ": '" + tok + "' is not an integer");
  return static_cast<int>(v);
}

}  // namespace detail

// Grammar: "ring:r1:r2" | "ball:r" | "lag:m:h" | "f0".
inline Kernel parse_kernel(const std::string& text) {
  const std::string what = "kernel spec '" + text + "'";
  auto parts = detail::split(text, ':');
  const std::string& fam = parts[0];
  if (fam == "f0") {
    if (parts.size() != 1) throw ValidationError(what + ": f0 takes no parameters");
    return Kernel::identity();
  }
  if (fam == "ring") {
    if (parts.size() != 3) throw ValidationError(what + ": expected ring:r1:r2");
    return Kernel::ring(detail::parse_double(parts[1], what), detail::parse_double(parts[2], what));
  }
  if (fam == "ball") {
    if (parts.size() != 2) throw ValidationError(what + ": expected ball:r");
    return Kernel::ball(detail::parse_double(parts[1], what));
  }
  if (fam == "lag") {
    if (parts.size() != 3) throw ValidationError(what + ": expected lag:m:h");
    return Kernel::grid_lag(detail::parse_int(parts[1], what), detail::parse_int(parts[2], what));
  }
  throw ValidationError(what + ": unknown kernel family '" + fam + "'");
}

// Comma-separated list of kernel specs.
inline std::vector<Kernel> parse_kernel_list(const std::string& text) {
  std::vector<Kernel> out;
  for (const std::string& tok : detail::split(text, ',')) {
    if (tok.empty()) throw ValidationError("kernel list '" + text + "': empty entry");
    out.push_back(parse_kernel(tok));
  }
  return out;
}

}  // namespace sbss
