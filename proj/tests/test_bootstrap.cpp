#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <sbss/bootstrap.hpp>
#include <sbss/geometry.hpp>
#include <sbss/kernels.hpp>
#include <sbss/rng.hpp>
#include <sbss/sample.hpp>
#include <sbss/simulate.hpp>

using sbss::Index;
using sbss::Kernel;
using sbss::KernelSet;
using sbss::LocationSet;
using sbss::Matrix;
using sbss::SpatialSample;

namespace {

Matrix random_matrix(Index n, Index p, sbss::Rng& rng) {
  Matrix m(n, p);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) m(i, j) = rng.normal();
  }
  return m;
}

Matrix full_grid(int side) {
  Matrix c(side * side, 2);
  int row = 0;
  for (int x = 0; x < side; ++x) {
    for (int y = 0; y < side; ++y) {
      c(row, 0) = x;
      c(row, 1) = y;
      ++row;
    }
  }
  return c;
}

LocationSet uniform_coords(double edge, Index n, sbss::Rng& rng) {
  Matrix c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = edge * rng.uniform01();
    c(i, 1) = edge * rng.uniform01();
  }
  return LocationSet(c);
}

}  // namespace

TEST_CASE("full-rank noise resample returns the input unchanged", "[bootstrap]") {
  sbss::Rng rng(1);
  Matrix z = random_matrix(20, 3, rng);
  Matrix out = sbss::resample_noise(z, 3, sbss::NoiseMode::Parametric, rng);
  CHECK((out - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parametric resample of everything is standard normal", "[bootstrap]") {
  sbss::Rng rng(2);
  Matrix z = 100.0 * random_matrix(10000, 2, rng);
  Matrix out = sbss::resample_noise(z, 0, sbss::NoiseMode::Parametric, rng);
  for (int c = 0; c < 2; ++c) {
    double mean = out.col(c).mean();
    double var = (out.col(c).array() - mean).square().sum() / out.rows();
    CHECK(std::abs(mean) < 0.05);
    CHECK(var == Catch::Approx(1.0).margin(0.05));
  }
}

TEST_CASE("signal columns survive a partial resample", "[bootstrap]") {
  sbss::Rng rng(3);
  Matrix z = random_matrix(50, 4, rng);
  Matrix out = sbss::resample_noise(z, 2, sbss::NoiseMode::Parametric, rng);
  CHECK((out.leftCols(2) - z.leftCols(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((out.rightCols(2) - z.rightCols(2)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("permuted noise values come from the pooled originals", "[bootstrap]") {
  sbss::Rng rng(4);
  Matrix z = random_matrix(40, 3, rng);
  Matrix out = sbss::resample_noise(z, 2, sbss::NoiseMode::Permute, rng);
  std::multiset<double> pool(z.col(2).data(), z.col(2).data() + 40);
  for (Index i = 0; i < 40; ++i) {
    REQUIRE(pool.count(out(i, 2)) > 0);
  }
  CHECK((out.leftCols(2) - z.leftCols(2)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("permute pools across all noise columns", "[bootstrap]") {
  sbss::Rng rng(5);
  Matrix z(3, 2);
  z << 1, 10, 2, 20, 3, 30;
  std::multiset<double> pool = {1, 2, 3, 10, 20, 30};
  bool crossed = false;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix out = sbss::resample_noise(z, 0, sbss::NoiseMode::Permute, rng);
    for (Index i = 0; i < out.size(); ++i) {
      REQUIRE(pool.count(out.data()[i]) > 0);
    }
    // a draw from the other column proves joint pooling
    for (Index i = 0; i < 3; ++i) {
      if (out(i, 0) >= 10 || out(i, 1) < 10) crossed = true;
    }
  }
  CHECK(crossed);
}

TEST_CASE("square domain partition counts tiles and donors", "[bootstrap]") {
  sbss::Rng rng(6);
  Matrix c(200, 2);
  for (Index i = 0; i < 200; ++i) {
    c(i, 0) = 30.0 * rng.uniform01();
    c(i, 1) = 30.0 * rng.uniform01();
  }
  // force the exact bounding box [0,30]^2
  c.row(0) << 0.0, 0.0;
  c.row(1) << 30.0, 30.0;
  auto part = sbss::block_partition(LocationSet(c), 10.0);
  CHECK(part.tile_anchors.rows() == 9);
  CHECK(part.donor_anchors.rows() == 441);
  // every location sits in exactly one tile
  std::vector<int> seen(200, 0);
  for (const auto& members : part.tile_members) {
    for (Index idx : members) ++seen[static_cast<std::size_t>(idx)];
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int v) { return v == 1; }));
}

TEST_CASE("block size larger than the domain leaves no donors", "[bootstrap]") {
  sbss::Rng rng(7);
  LocationSet loc = uniform_coords(5.0, 30, rng);
  CHECK_THROWS_AS(sbss::block_partition(loc, 50.0), sbss::NoDonorBlocks);
}

TEST_CASE("block size equal to the domain gives one tile and one donor", "[bootstrap]") {
  Matrix c(4, 2);
  c << 0, 0, 10, 0, 0, 10, 10, 10;
  auto part = sbss::block_partition(LocationSet(c), 10.0);
  CHECK(part.tile_anchors.rows() == 1);
  CHECK(part.donor_anchors.rows() == 1);
  CHECK(part.tile_members[0].size() == 4);
}

TEST_CASE("whole-domain block resample is the identity", "[bootstrap]") {
  sbss::Rng rng(8);
  Matrix c(25, 2);
  for (Index i = 0; i < 25; ++i) {
    c(i, 0) = 10.0 * rng.uniform01();
    c(i, 1) = 10.0 * rng.uniform01();
  }
  c.row(0) << 0.0, 0.0;
  c.row(1) << 10.0, 10.0;
  LocationSet loc(c);
  Matrix z = random_matrix(25, 2, rng);
  auto part = sbss::block_partition(loc, 10.0);
  REQUIRE(part.tile_anchors.rows() == 1);
  REQUIRE(part.donor_anchors.rows() == 1);
  auto out = sbss::spatial_resample_irregular(z, loc, part, rng);
  REQUIRE(out.coords.rows() == 25);
  CHECK((out.values - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("self-donating tiles reproduce the field", "[bootstrap]") {
  sbss::Rng rng(9);
  Matrix c(40, 2);
  for (Index i = 0; i < 40; ++i) {
    c(i, 0) = 20.0 * rng.uniform01();
    c(i, 1) = 10.0 * rng.uniform01();
  }
  c.row(0) << 0.0, 0.0;
  c.row(1) << 20.0, 10.0;
  LocationSet loc(c);
  Matrix z = random_matrix(40, 3, rng);
  auto part = sbss::block_partition(loc, 10.0);
  REQUIRE(part.tile_anchors.rows() == 2);
  // donor anchored exactly at each tile anchor reproduces that tile
  std::vector<std::int64_t> choice(2);
  for (Index t = 0; t < 2; ++t) {
    std::int64_t found = -1;
    for (Index d = 0; d < part.donor_anchors.rows(); ++d) {
      bool match = true;
      for (int k = 0; k < 2; ++k) {
        if (part.donor_anchors(d, k) != part.tile_anchors(t, k) * 10) match = false;
      }
      if (match) found = d;
    }
    REQUIRE(found >= 0);
    choice[static_cast<std::size_t>(t)] = found;
  }
  auto out = sbss::resample_with_donors(z, loc, part, choice);
  REQUIRE(out.coords.rows() == 40);
  // every resampled row is an original (coordinate, value) row
  for (Index i = 0; i < 40; ++i) {
    double best = 1e300;
    for (Index j = 0; j < 40; ++j) {
      double dist = (out.coords.row(i) - loc.coords().row(j)).norm() +
                    (out.values.row(i) - z.row(j)).norm();
      best = std::min(best, dist);
    }
    REQUIRE(best < 1e-9);
  }
}

TEST_CASE("resampled point count is close to n on average", "[bootstrap]") {
  sbss::Rng rng(10);
  const Index n = 900;
  Matrix c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = 30.0 * rng.uniform01();
    c(i, 1) = 30.0 * rng.uniform01();
  }
  LocationSet loc(c);
  Matrix z = random_matrix(n, 1, rng);
  auto part = sbss::block_partition(loc, 10.0);
  double total = 0.0;
  const int draws = 200;
  for (int d = 0; d < draws; ++d) {
    auto out = sbss::spatial_resample_irregular(z, loc, part, rng);
    total += static_cast<double>(out.coords.rows());
    // never outside the bounding region
    for (Index i = 0; i < out.coords.rows(); ++i) {
      for (int k = 0; k < 2; ++k) {
        REQUIRE(out.coords(i, k) >= part.lower(k) - 1e-9);
        REQUIRE(out.coords(i, k) <= part.lower(k) + part.edge(k) + 1e-6);
      }
    }
  }
  CHECK(total / draws == Catch::Approx(static_cast<double>(n)).epsilon(0.10));
}

TEST_CASE("regular partition of a four by four grid", "[bootstrap]") {
  LocationSet loc(full_grid(4));
  auto part = sbss::regular_block_partition(loc, 2);
  CHECK(part.tile_anchors.rows() == 4);
  CHECK(part.donor_anchors.rows() == 9);
}

TEST_CASE("whole-grid regular tile can only donate itself", "[bootstrap]") {
  sbss::Rng rng(11);
  LocationSet loc(full_grid(3));
  Matrix z = random_matrix(9, 2, rng);
  auto part = sbss::regular_block_partition(loc, 3);
  REQUIRE(part.tile_anchors.rows() == 1);
  REQUIRE(part.donor_anchors.rows() == 1);
  Matrix out = sbss::spatial_resample_regular(z, part, rng);
  CHECK((out - z).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("regular resample preserves the shape and the value pool", "[bootstrap]") {
  sbss::Rng rng(12);
  LocationSet loc(full_grid(6));
  Matrix z = random_matrix(36, 2, rng);
  auto part = sbss::regular_block_partition(loc, 2);
  std::multiset<double> pool(z.data(), z.data() + z.size());
  for (int d = 0; d < 20; ++d) {
    Matrix out = sbss::spatial_resample_regular(z, part, rng);
    REQUIRE(out.rows() == 36);
    REQUIRE(out.cols() == 2);
    for (Index i = 0; i < out.size(); ++i) {
      REQUIRE(pool.count(out.data()[i]) > 0);
    }
  }
}

TEST_CASE("oversized regular blocks are refused", "[bootstrap]") {
  LocationSet loc(full_grid(4));
  CHECK_THROWS_AS(sbss::regular_block_partition(loc, 7), sbss::NoDonorBlocks);
}

TEST_CASE("irregular locations are refused by the regular partition", "[bootstrap]") {
  sbss::Rng rng(13);
  LocationSet loc = uniform_coords(10.0, 20, rng);
  CHECK_THROWS_AS(sbss::regular_block_partition(loc, 2), sbss::NotRegular);
}

TEST_CASE("default block sizes by regime", "[bootstrap]") {
  CHECK(sbss::default_block_size(900, 2, false) == 10.0);
  CHECK(sbss::default_block_size(900, 2, true) == 6.0);   // ceil(900^(1/4)) = 6
  CHECK(sbss::default_block_size(16, 2, true) == 2.0);
}

TEST_CASE("strong signal data never loses to noise replicates", "[bootstrap]") {
  sbss::Rng rng(14);
  LocationSet loc(full_grid(12));
  sbss::LatentModel model;
  model.signals = {{3.0, 2.0}};
  model.noise_count = 1;
  SpatialSample sample = sbss::sample_field(loc, model, rng);
  // inflate the signal so t_0 towers over every noise-only replicate
  Matrix boosted = sample.values;
  boosted.col(0) *= 5.0;
  SpatialSample strong(sample.loc, boosted);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  sbss::BootstrapSpec spec;
  spec.replicates = 200;
  spec.noise_mode = sbss::NoiseMode::Parametric;
  spec.seed = 99;
  auto res = sbss::bootstrap_test(strong, kernels, 0, spec);
  CHECK(res.p_value == Catch::Approx(1.0 / 201.0));
  CHECK(res.method == "param");
  auto null = std::get<sbss::BootstrapNull>(res.null_model);
  CHECK(null.replicates == 200);
  CHECK(null.count_geq == 0);
}

TEST_CASE("bootstrap p-values respect the lower bound", "[bootstrap]") {
  sbss::Rng rng(15);
  LocationSet loc(full_grid(8));
  Matrix x = random_matrix(64, 2, rng);
  SpatialSample sample(loc, x);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  for (auto mode : {sbss::NoiseMode::Parametric, sbss::NoiseMode::Permute}) {
    sbss::BootstrapSpec spec;
    spec.replicates = 37;
    spec.noise_mode = mode;
    spec.seed = 5;
    auto res = sbss::bootstrap_test(sample, kernels, 0, spec);
    CHECK(res.p_value >= 1.0 / 38.0 - 1e-15);
    CHECK(res.p_value <= 1.0);
    CHECK(res.method == (mode == sbss::NoiseMode::Parametric ? "param" : "perm"));
  }
}

TEST_CASE("identical seeds give identical results across worker counts", "[bootstrap]") {
  sbss::Rng rng(16);
  LocationSet loc(full_grid(9));
  Matrix x = random_matrix(81, 3, rng);
  SpatialSample sample(loc, x);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  sbss::BootstrapSpec spec;
  spec.replicates = 60;
  spec.noise_mode = sbss::NoiseMode::Parametric;
  spec.seed = 123;
  auto a = sbss::bootstrap_test(sample, kernels, 1, spec, {}, 1);
  auto b = sbss::bootstrap_test(sample, kernels, 1, spec, {}, 3);
  auto c = sbss::bootstrap_test(sample, kernels, 1, spec, {}, 1);
  CHECK(a.p_value == b.p_value);
  CHECK(a.p_value == c.p_value);
  CHECK(a.stat == b.stat);
}

TEST_CASE("spatial modes tag their methods", "[bootstrap]") {
  sbss::Rng rng(17);
  const Index n = 250;
  Matrix c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = 30.0 * rng.uniform01();
    c(i, 1) = 30.0 * rng.uniform01();
  }
  Matrix x = random_matrix(n, 2, rng);
  SpatialSample sample(LocationSet(c), x);
  auto kernels = KernelSet::make({Kernel::ring(0, 3)});
  sbss::BootstrapSpec spec;
  spec.replicates = 19;
  spec.noise_mode = sbss::NoiseMode::Permute;
  spec.spatial = sbss::IrregularBlocks{10.0};
  spec.seed = 7;
  auto res = sbss::bootstrap_test(sample, kernels, 0, spec);
  CHECK(res.method == "sp-perm");
  CHECK(res.p_value >= 1.0 / 20.0 - 1e-15);
  CHECK(res.p_value <= 1.0);
}

TEST_CASE("regular spatial mode works on grid samples", "[bootstrap]") {
  sbss::Rng rng(18);
  LocationSet loc(full_grid(10));
  Matrix x = random_matrix(100, 2, rng);
  SpatialSample sample(loc, x);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  sbss::BootstrapSpec spec;
  spec.replicates = 25;
  spec.noise_mode = sbss::NoiseMode::Parametric;
  spec.spatial = sbss::RegularBlocks{3};
  spec.seed = 31;
  auto res = sbss::bootstrap_test(sample, kernels, 0, spec);
  CHECK(res.method == "sp-param");
  CHECK(res.p_value >= 1.0 / 26.0 - 1e-15);
  auto rerun = sbss::bootstrap_test(sample, kernels, 0, spec, {}, 2);
  CHECK(res.p_value == rerun.p_value);
}

TEST_CASE("replicate counts must be positive", "[bootstrap]") {
  sbss::Rng rng(19);
  LocationSet loc(full_grid(5));
  Matrix x = random_matrix(25, 2, rng);
  SpatialSample sample(loc, x);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  sbss::BootstrapSpec spec;
  spec.replicates = 0;
  CHECK_THROWS_AS(sbss::bootstrap_test(sample, kernels, 0, spec), sbss::ValidationError);
}
