#pragma once

// Bootstrap null distributions for the dimension tests. A single fit on the
// data yields latent components; each replicate replaces the trailing p-r
// noise columns (parametric Gaussian or pooled-permutation draws), optionally
// applies a moving-block spatial bootstrap, maps back through the inverse
// unmixing matrix, and refits. Replicates draw from per-index RNG streams,
// so p-values are identical for any worker count.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "sbss/diag.hpp"
#include "sbss/dimtest.hpp"
#include "sbss/errors.hpp"
#include "sbss/rng.hpp"

namespace sbss {

enum class NoiseMode { Parametric, Permute };

struct IrregularBlocks {
  double block_size;
};
struct RegularBlocks {
  int block_size;
};
using SpatialMode = std::variant<std::monostate, IrregularBlocks, RegularBlocks>;

struct BootstrapSpec {
  int replicates = 200;
  NoiseMode noise_mode = NoiseMode::Parametric;
  SpatialMode spatial{};
  std::uint64_t seed = 0;
};

// Default moving-block edge when the caller does not choose one:
// 10 length units on irregular domains, ceil(n^(1/2d)) lattice units on grids.
inline double default_block_size(Index n, int d, bool regular) {
  if (!regular) return 10.0;
  return std::ceil(std::pow(static_cast<double>(n), 1.0 / (2.0 * d)));
}

// Replace the trailing p - r latent columns by fresh noise. Parametric draws
// are i.i.d. standard normal; Permute draws i.i.d. from the pooled empirical
// distribution of all n (p - r) noise entries.
inline Matrix resample_noise(const Matrix& latent, int r, NoiseMode mode, Rng& rng) {
  const Index p = latent.cols();
  const Index n = latent.rows();
  if (r < 0 || r > p) {
    throw RankOutOfRange("resample_noise: r must lie in [0, " + std::to_string(p) + "]");
  }
  Matrix out = latent;
  if (r == p) return out;
  if (mode == NoiseMode::Parametric) {
    for (Index c = r; c < p; ++c) {
      for (Index i = 0; i < n; ++i) out(i, c) = rng.normal();
    }
    return out;
  }
  std::vector<double> pool;
  pool.reserve(static_cast<std::size_t>(n * (p - r)));
  for (Index c = r; c < p; ++c) {
    for (Index i = 0; i < n; ++i) pool.push_back(latent(i, c));
  }
  for (Index c = r; c < p; ++c) {
    for (Index i = 0; i < n; ++i) {
      out(i, c) = pool[static_cast<std::size_t>(rng.below(pool.size()))];
    }
  }
  return out;
}

// Moving-block geometry on an irregular domain. Coordinates are shifted so
// the bounding box sits at the origin; the region is treated as the
// half-open box prod_d (0, edge_d]. Tiles are the grid cells of edge m
// intersecting the box (boundary points with a zero coordinate belong to the
// first cell). Donor blocks are the integer-anchored cubes of edge m lying
// fully inside the box.
struct BlockPartition {
  Vector lower;       // bounding-box lower corner (original coordinates)
  Vector edge;        // bounding-box edge lengths
  double block_size;  // m
  IntMatrix tile_anchors;                          // T x d cell indices i (cell = (i m, (i+1) m])
  std::vector<std::vector<Index>> tile_members;    // location indices per tile
  IntMatrix donor_anchors;                         // D x d integer anchors j
  std::vector<std::vector<Index>> donor_members;   // location indices with t - j in (0, m]^d
};

inline BlockPartition block_partition(const LocationSet& loc, double m) {
  if (!(m > 0.0)) throw ValidationError("block_partition: block size must be positive");
  const Matrix& c = loc.coords();
  const Index n = c.rows();
  const int d = static_cast<int>(c.cols());
  const double tol = 1e-9 * std::max(1.0, m);

  BlockPartition part;
  part.lower = c.colwise().minCoeff().transpose();
  part.edge = (c.colwise().maxCoeff() - c.colwise().minCoeff()).transpose();
  part.block_size = m;

  // Tile grid dimensions.
  std::vector<std::int64_t> tiles_per_dim(static_cast<std::size_t>(d));
  std::int64_t tile_total = 1;
  for (int k = 0; k < d; ++k) {
    std::int64_t cnt = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(std::ceil((part.edge(k) - tol) / m)));
    tiles_per_dim[static_cast<std::size_t>(k)] = cnt;
    tile_total *= cnt;
    if (tile_total > 10'000'000) throw ValidationError("block_partition: too many tiles");
  }

  part.tile_anchors.resize(tile_total, d);
  part.tile_members.assign(static_cast<std::size_t>(tile_total), {});
  for (std::int64_t t = 0; t < tile_total; ++t) {
    std::int64_t rem = t;
    for (int k = d - 1; k >= 0; --k) {
      part.tile_anchors(t, k) = rem % tiles_per_dim[static_cast<std::size_t>(k)];
      rem /= tiles_per_dim[static_cast<std::size_t>(k)];
    }
  }
  auto tile_linear = [&](const std::vector<std::int64_t>& idx) {
    std::int64_t lin = 0;
    for (int k = 0; k < d; ++k) lin = lin * tiles_per_dim[static_cast<std::size_t>(k)] + idx[static_cast<std::size_t>(k)];
    return lin;
  };
  std::vector<std::int64_t> idx(static_cast<std::size_t>(d));
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double t = c(i, k) - part.lower(k);
      std::int64_t cell = static_cast<std::int64_t>(std::ceil(t / m - tol)) - 1;
      cell = std::clamp<std::int64_t>(cell, 0, tiles_per_dim[static_cast<std::size_t>(k)] - 1);
      idx[static_cast<std::size_t>(k)] = cell;
    }
    part.tile_members[static_cast<std::size_t>(tile_linear(idx))].push_back(i);
  }

  // Donor anchors: integer j >= 0 with j + m <= edge per dimension.
  std::vector<std::int64_t> donors_per_dim(static_cast<std::size_t>(d));
  std::int64_t donor_total = 1;
  for (int k = 0; k < d; ++k) {
    std::int64_t hi = static_cast<std::int64_t>(std::floor(part.edge(k) - m + tol));
    if (hi < 0) {
      throw NoDonorBlocks("block_partition: block size " + std::to_string(m) +
                          " exceeds the domain edge " + std::to_string(part.edge(k)));
    }
    donors_per_dim[static_cast<std::size_t>(k)] = hi + 1;
    donor_total *= hi + 1;
    if (donor_total > 50'000'000) throw ValidationError("block_partition: too many donor blocks");
  }
  part.donor_anchors.resize(donor_total, d);
  part.donor_members.assign(static_cast<std::size_t>(donor_total), {});
  for (std::int64_t t = 0; t < donor_total; ++t) {
    std::int64_t rem = t;
    for (int k = d - 1; k >= 0; --k) {
      part.donor_anchors(t, k) = rem % donors_per_dim[static_cast<std::size_t>(k)];
      rem /= donors_per_dim[static_cast<std::size_t>(k)];
    }
  }
  auto donor_linear = [&](const std::vector<std::int64_t>& jdx) {
    std::int64_t lin = 0;
    for (int k = 0; k < d; ++k) lin = lin * donors_per_dim[static_cast<std::size_t>(k)] + jdx[static_cast<std::size_t>(k)];
    return lin;
  };
  // Point t belongs to donor j iff t - j in (0, m]^d, i.e. j in [t - m, t).
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges(static_cast<std::size_t>(d));
  std::vector<std::int64_t> jdx(static_cast<std::size_t>(d));
  for (Index i = 0; i < n; ++i) {
    bool any = true;
    for (int k = 0; k < d; ++k) {
      double t = c(i, k) - part.lower(k);
      std::int64_t lo_j = static_cast<std::int64_t>(std::ceil(t - m - tol));
      std::int64_t hi_j = static_cast<std::int64_t>(std::ceil(t - tol)) - 1;
      // points on the lower boundary (t = 0) belong to the first block, as in
      // the tile assignment above
      hi_j = std::max<std::int64_t>(hi_j, 0);
      lo_j = std::max<std::int64_t>(lo_j, 0);
      hi_j = std::min<std::int64_t>(hi_j, donors_per_dim[static_cast<std::size_t>(k)] - 1);
      if (lo_j > hi_j) {
        any = false;
        break;
      }
      ranges[static_cast<std::size_t>(k)] = {lo_j, hi_j};
    }
    if (!any) continue;
    for (int k = 0; k < d; ++k) jdx[static_cast<std::size_t>(k)] = ranges[static_cast<std::size_t>(k)].first;
    for (;;) {
      part.donor_members[static_cast<std::size_t>(donor_linear(jdx))].push_back(i);
      int k = d - 1;
      for (; k >= 0; --k) {
        if (jdx[static_cast<std::size_t>(k)] < ranges[static_cast<std::size_t>(k)].second) {
          ++jdx[static_cast<std::size_t>(k)];
          for (int k2 = k + 1; k2 < d; ++k2) jdx[static_cast<std::size_t>(k2)] = ranges[static_cast<std::size_t>(k2)].first;
          break;
        }
      }
      if (k < 0) break;
    }
  }
  return part;
}

struct ResampledField {
  Matrix coords;
  Matrix values;
};

// Deterministic core of the irregular moving-block resample: tile t receives
// the donor block donor_choice[t]; donor points are translated into the tile
// and trimmed to the bounding box.
inline ResampledField resample_with_donors(const Matrix& latent, const LocationSet& loc,
                                           const BlockPartition& part,
                                           const std::vector<std::int64_t>& donor_choice) {
  const Matrix& c = loc.coords();
  const int d = loc.dim();
  const double m = part.block_size;
  const double tol = 1e-9 * std::max(1.0, m);
  const Index tiles = part.tile_anchors.rows();
  if (static_cast<Index>(donor_choice.size()) != tiles) {
    throw ValidationError("resample_with_donors: one donor index per tile required");
  }

  std::vector<Index> rows;
  std::vector<Vector> coords;
  Vector u(d);
  for (Index t = 0; t < tiles; ++t) {
    const std::int64_t dc = donor_choice[static_cast<std::size_t>(t)];
    if (dc < 0 || dc >= part.donor_anchors.rows()) {
      throw ValidationError("resample_with_donors: donor index out of range");
    }
    for (Index src : part.donor_members[static_cast<std::size_t>(dc)]) {
      bool keep = true;
      for (int k = 0; k < d; ++k) {
        const double rel = (c(src, k) - part.lower(k)) - static_cast<double>(part.donor_anchors(dc, k));
        u(k) = static_cast<double>(part.tile_anchors(t, k)) * m + rel;
        if (u(k) > part.edge(k) + tol) {
          keep = false;
          break;
        }
      }
      if (!keep) continue;
      rows.push_back(src);
      coords.push_back(part.lower + u);
    }
  }
  if (rows.empty()) throw EmptyResample("spatial resample produced no points");

  ResampledField out;
  out.coords.resize(static_cast<Index>(rows.size()), d);
  out.values.resize(static_cast<Index>(rows.size()), latent.cols());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    out.coords.row(static_cast<Index>(s)) = coords[s].transpose();
    out.values.row(static_cast<Index>(s)) = latent.row(rows[s]);
  }
  return out;
}

// Irregular moving-block bootstrap: each tile independently draws a uniform
// donor block.
inline ResampledField spatial_resample_irregular(const Matrix& latent, const LocationSet& loc,
                                                 const BlockPartition& part, Rng& rng) {
  std::vector<std::int64_t> choice(static_cast<std::size_t>(part.tile_anchors.rows()));
  for (auto& dc : choice) dc = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(part.donor_anchors.rows())));
  return resample_with_donors(latent, loc, part, choice);
}

// Moving-block geometry on a lattice. Grid coordinates are shifted to
// {1..G_d}; tiles are complete m-cubes anchored at multiples of m that fit
// inside the grid; donors are all integer-anchored m-cubes inside it.
struct RegularBlockPartition {
  int block_size = 0;
  IntVector grid_extent;                       // G per dimension
  IntMatrix tile_anchors;                      // T x d anchors a (tile covers a + {1..m}^d)
  std::vector<std::vector<Index>> tile_cells;  // per tile: m^d location indices (-1 when absent)
  IntMatrix donor_anchors;                     // D x d anchors j
  std::vector<std::vector<Index>> donor_cells; // per donor: m^d location indices (-1 when absent)
};

inline RegularBlockPartition regular_block_partition(const LocationSet& loc, int m) {
  if (m < 1) throw ValidationError("regular_block_partition: block size must be >= 1");
  GridDescriptor gd = detect_grid(loc);
  if (!gd.is_regular) {
    throw NotRegular("regular_block_partition: locations are not on a uniform lattice");
  }
  const Index n = loc.n();
  const int d = loc.dim();

  RegularBlockPartition part;
  part.block_size = m;
  IntVector lo = gd.integer_coords.colwise().minCoeff().transpose();
  IntMatrix shifted = gd.integer_coords;
  for (Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) shifted(i, k) = gd.integer_coords(i, k) - lo(k) + 1;
  }
  part.grid_extent = shifted.colwise().maxCoeff().transpose();

  std::int64_t tile_total = 1;
  std::int64_t donor_total = 1;
  std::vector<std::int64_t> tiles_per_dim(static_cast<std::size_t>(d));
  std::vector<std::int64_t> donors_per_dim(static_cast<std::size_t>(d));
  for (int k = 0; k < d; ++k) {
    const std::int64_t g = part.grid_extent(k);
    tiles_per_dim[static_cast<std::size_t>(k)] = g / m;
    donors_per_dim[static_cast<std::size_t>(k)] = g - m + 1;
    if (tiles_per_dim[static_cast<std::size_t>(k)] < 1 || donors_per_dim[static_cast<std::size_t>(k)] < 1) {
      throw NoDonorBlocks("regular_block_partition: block size " + std::to_string(m) +
                          " exceeds the grid extent " + std::to_string(g));
    }
    tile_total *= tiles_per_dim[static_cast<std::size_t>(k)];
    donor_total *= donors_per_dim[static_cast<std::size_t>(k)];
    if (tile_total > 10'000'000 || donor_total > 50'000'000) {
      throw ValidationError("regular_block_partition: too many blocks");
    }
  }

  auto map = detail::lattice_index(shifted);
  auto fill_anchors = [&](IntMatrix& anchors, const std::vector<std::int64_t>& per_dim,
                          std::int64_t total, std::int64_t scale) {
    anchors.resize(total, d);
    for (std::int64_t t = 0; t < total; ++t) {
      std::int64_t rem = t;
      for (int k = d - 1; k >= 0; --k) {
        anchors(t, k) = (rem % per_dim[static_cast<std::size_t>(k)]) * scale;
        rem /= per_dim[static_cast<std::size_t>(k)];
      }
    }
  };
  fill_anchors(part.tile_anchors, tiles_per_dim, tile_total, m);
  fill_anchors(part.donor_anchors, donors_per_dim, donor_total, 1);

  const std::int64_t cells = static_cast<std::int64_t>(std::pow(m, d) + 0.5);
  auto collect = [&](const IntMatrix& anchors, std::vector<std::vector<Index>>& out) {
    out.assign(static_cast<std::size_t>(anchors.rows()), {});
    for (Index t = 0; t < anchors.rows(); ++t) {
      auto& slot = out[static_cast<std::size_t>(t)];
      slot.resize(static_cast<std::size_t>(cells), -1);
      for (std::int64_t ofs = 0; ofs < cells; ++ofs) {
        detail::CellKey key;
        std::int64_t rem = ofs;
        for (int k = d - 1; k >= 0; --k) {
          key.c[static_cast<std::size_t>(k)] = anchors(t, k) + rem % m + 1;
          rem /= m;
        }
        auto it = map.find(key);
        if (it != map.end()) slot[static_cast<std::size_t>(ofs)] = it->second;
      }
    }
  };
  collect(part.tile_anchors, part.tile_cells);
  collect(part.donor_anchors, part.donor_cells);
  return part;
}

// Regular moving-block bootstrap: values move between lattice cells, the
// location set stays fixed. Points outside any complete tile, or whose donor
// cell is absent from the grid, keep their incoming values.
inline Matrix spatial_resample_regular(const Matrix& latent, const RegularBlockPartition& part,
                                       Rng& rng) {
  Matrix out = latent;
  const std::size_t cells = part.tile_cells.empty() ? 0 : part.tile_cells.front().size();
  for (std::size_t t = 0; t < part.tile_cells.size(); ++t) {
    const std::size_t dc = static_cast<std::size_t>(
        rng.below(static_cast<std::uint64_t>(part.donor_cells.size())));
    for (std::size_t ofs = 0; ofs < cells; ++ofs) {
      const Index dst = part.tile_cells[t][ofs];
      const Index src = part.donor_cells[dc][ofs];
      if (dst >= 0 && src >= 0) out.row(dst) = latent.row(src);
    }
  }
  return out;
}

namespace detail {

struct ReplicateFailure {
  int index;
  std::string message;
};

}  // namespace detail

// Bootstrap test of H_{0r}: p = (#{t*_b >= t} + 1) / (B + 1).
inline TestResult bootstrap_test(const SpatialSample& sample, const KernelSet& kernels, int r,
                                 const BootstrapSpec& spec, const TestOptions& opt = {},
                                 int workers = 0) {
  detail::check_rank(sample.p(), r);
  detail::check_test_kernels(kernels, opt.allow_ball);
  if (spec.replicates < 1) throw ValidationError("bootstrap_test: replicates must be >= 1");

  FitOptions fopt;
  fopt.centered = opt.centered;
  fopt.renormalized = !opt.unnormalized;
  fopt.jd = opt.jd;

  ScatterPlan plan(sample.loc, kernels.kernels);
  const SbssSolution sol = fit(plan, sample.values, fopt);
  const double t_obs = statistic(sol, r);
  const Matrix mixing = sol.gamma.inverse();

  const bool irregular = std::holds_alternative<IrregularBlocks>(spec.spatial);
  const bool regular = std::holds_alternative<RegularBlocks>(spec.spatial);
  std::optional<BlockPartition> ipart;
  std::optional<RegularBlockPartition> rpart;
  if (irregular) {
    ipart = block_partition(sample.loc, std::get<IrregularBlocks>(spec.spatial).block_size);
  }
  if (regular) {
    rpart = regular_block_partition(sample.loc, std::get<RegularBlocks>(spec.spatial).block_size);
  }

  const int B = spec.replicates;
  std::vector<double> t_boot(static_cast<std::size_t>(B), 0.0);
  std::mutex fail_mutex;
  std::optional<detail::ReplicateFailure> failure;

  auto run_replicate = [&](int b) {
    Rng rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(b) + 1);
    Matrix z = resample_noise(sol.latent, r, spec.noise_mode, rng);
    if (irregular) {
      // Redraw until the resample keeps a workable point count.
      for (int attempt = 0;; ++attempt) {
        if (attempt >= 100) {
          throw EmptyResample("spatial resample kept fewer than 10 points in 100 attempts");
        }
        ResampledField field;
        std::optional<LocationSet> new_loc;
        try {
          field = spatial_resample_irregular(z, sample.loc, *ipart, rng);
          if (field.coords.rows() < 10) continue;
          new_loc.emplace(Matrix(field.coords));
        } catch (const EmptyResample&) {
          continue;
        } catch (const ValidationError&) {
          continue;  // duplicate resampled locations: try again
        }
        Matrix x = field.values * mixing.transpose();
        x.rowwise() += sol.mean.transpose();
        ScatterPlan rep_plan(*new_loc, kernels.kernels);
        SbssSolution rep = fit(rep_plan, x, fopt);
        t_boot[static_cast<std::size_t>(b)] = statistic(rep, r);
        return;
      }
    }
    if (regular) z = spatial_resample_regular(z, *rpart, rng);
    Matrix x = z * mixing.transpose();
    x.rowwise() += sol.mean.transpose();
    SbssSolution rep = fit(plan, x, fopt);
    t_boot[static_cast<std::size_t>(b)] = statistic(rep, r);
  };

  int thread_count = workers > 0 ? workers : static_cast<int>(std::thread::hardware_concurrency());
  thread_count = std::max(1, std::min(thread_count, B));
  if (thread_count == 1) {
    for (int b = 0; b < B; ++b) {
      try {
        run_replicate(b);
      } catch (const Error& e) {
        throw Error("bootstrap replicate " + std::to_string(b) + ": " + e.what());
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int w = 0; w < thread_count; ++w) {
      pool.emplace_back([&, w]() {
        for (int b = w; b < B; b += thread_count) {
          try {
            run_replicate(b);
          } catch (const Error& e) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            if (!failure || b < failure->index) failure = {b, e.what()};
            return;
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) {
      throw Error("bootstrap replicate " + std::to_string(failure->index) + ": " +
                  failure->message);
    }
  }

  int count_geq = 0;
  for (double tb : t_boot) {
    if (tb >= t_obs) ++count_geq;
  }

  TestResult res;
  res.r = r;
  res.stat = t_obs;
  res.p_value = (static_cast<double>(count_geq) + 1.0) / (static_cast<double>(B) + 1.0);
  res.null_model = BootstrapNull{B, count_geq};
  const bool spatial = irregular || regular;
  res.method = std::string(spatial ? "sp-" : "") +
               (spec.noise_mode == NoiseMode::Parametric ? "param" : "perm");
  return res;
}

}  // namespace sbss
