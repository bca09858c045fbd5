#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include <sbss/diag.hpp>
#include <sbss/dimtest.hpp>
#include <sbss/geometry.hpp>
#include <sbss/kernels.hpp>
#include <sbss/rng.hpp>
#include <sbss/sample.hpp>
#include <sbss/simulate.hpp>
#include <sbss/special.hpp>

using sbss::Index;
using sbss::Kernel;
using sbss::KernelSet;
using sbss::LocationSet;
using sbss::Matrix;
using sbss::SpatialSample;

namespace {

sbss::SbssSolution solution_with_d(std::vector<Matrix> ds, Index n) {
  sbss::SbssSolution sol;
  Index p = ds.front().rows();
  sol.gamma = Matrix::Identity(p, p);
  sol.whitener = Matrix::Identity(p, p);
  sol.d_matrices = std::move(ds);
  sol.pseudo_eigenvalues = sbss::Vector::Zero(p);
  sol.latent = Matrix::Zero(n, p);
  sol.mean = sbss::Vector::Zero(p);
  sol.n = n;
  sol.kernel_normalizations.assign(sol.d_matrices.size(), 1.0);
  return sol;
}

SpatialSample noise_grid_sample(int side, int p, sbss::Rng& rng) {
  Matrix c(side * side, 2);
  Matrix x(side * side, p);
  int row = 0;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      c(row, 0) = i;
      c(row, 1) = j;
      for (int col = 0; col < p; ++col) x(row, col) = rng.normal();
      ++row;
    }
  }
  return SpatialSample(LocationSet(c), x);
}

double ks_to_uniform(std::vector<double> vals) {
  std::sort(vals.begin(), vals.end());
  double n = static_cast<double>(vals.size());
  double d = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    d = std::max(d, std::abs(vals[i] - (static_cast<double>(i) + 1.0) / n));
    d = std::max(d, std::abs(vals[i] - static_cast<double>(i) / n));
  }
  return d;
}

}  // namespace

TEST_CASE("statistic on a one-entry trailing block", "[dimtest]") {
  Matrix d(2, 2);
  d << 5, 0, 0, 0.2;
  auto sol = solution_with_d({d}, 100);
  CHECK(sbss::statistic(sol, 1) == Catch::Approx(2.0));
}

TEST_CASE("statistic vanishes when the trailing blocks are zero", "[dimtest]") {
  Matrix d(2, 2);
  d << 3, 0, 0, 0;
  auto sol = solution_with_d({d}, 100);
  CHECK(sbss::statistic(sol, 1) == 0.0);
}

TEST_CASE("statistic sums squared Frobenius norms across kernels", "[dimtest]") {
  Matrix d1 = Matrix::Zero(3, 3);
  d1(0, 0) = 9;
  d1(1, 1) = 1;
  d1(2, 2) = 1;
  Matrix d2 = Matrix::Zero(3, 3);
  d2(0, 0) = 7;
  d2(1, 2) = 1;
  d2(2, 1) = 1;
  auto sol = solution_with_d({d1, d2}, 10);
  // trailing 2x2 blocks: identity and the swap matrix, squared norms 2 and 2
  CHECK(sbss::statistic(sol, 1) == Catch::Approx(20.0));
}

TEST_CASE("statistic rejects ranks outside the valid range", "[dimtest]") {
  Matrix d = Matrix::Identity(3, 3);
  auto sol = solution_with_d({d}, 10);
  CHECK_THROWS_AS(sbss::statistic(sol, -1), sbss::RankOutOfRange);
  CHECK_THROWS_AS(sbss::statistic(sol, 3), sbss::RankOutOfRange);
  CHECK_NOTHROW(sbss::statistic(sol, 0));
  CHECK_NOTHROW(sbss::statistic(sol, 2));
}

TEST_CASE("chi-square degrees of freedom", "[dimtest]") {
  CHECK(sbss::chi2_test_df(5, 3, 1) == 3);
  CHECK(sbss::chi2_test_df(5, 0, 1) == 15);
  CHECK(sbss::chi2_test_df(10, 3, 2) == 56);
}

TEST_CASE("zero statistic has p-value one", "[dimtest]") {
  CHECK(sbss::asymptotic_pvalue(0.0, 5, 3, 1) == Catch::Approx(1.0));
}

TEST_CASE("asymptotic p-value reference", "[dimtest]") {
  CHECK(sbss::asymptotic_pvalue(2.0, 5, 3, 1) == Catch::Approx(0.5724067044708798).epsilon(1e-10));
}

TEST_CASE("unit weights reduce the weighted tail to the plain one", "[dimtest]") {
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0, 15.0}) {
    double plain = sbss::chi2_sf(t, 3.0);
    double weighted = sbss::weighted_chi2_pvalue(t, {1.0}, 3);
    CHECK(weighted == Catch::Approx(plain).margin(1e-6));
  }
}

TEST_CASE("equal weights reduce to a scaled chi-square", "[dimtest]") {
  for (double t : {1.0, 3.0, 6.0, 10.0}) {
    double expect = sbss::chi2_sf(t / 2.0, 2.0);
    CHECK(sbss::weighted_chi2_pvalue(t, {2.0, 2.0}, 1) == Catch::Approx(expect).margin(1e-9));
  }
}

TEST_CASE("weighted tail matches a Monte-Carlo oracle", "[dimtest]") {
  // exact tail of 1*chi2_2 + 3*chi2_2 at t=8 is about 0.38624
  double computed = sbss::weighted_chi2_pvalue(8.0, {1.0, 3.0}, 2);
  CHECK(computed == Catch::Approx(0.3862378880298327).margin(2e-6));
  sbss::Rng rng(202);
  const int draws = 10000000;
  long long hits = 0;
  for (int i = 0; i < draws; ++i) {
    double q = -2.0 * std::log(rng.uniform01()) - 6.0 * std::log(rng.uniform01());
    if (q >= 8.0) ++hits;
  }
  double mc = static_cast<double>(hits) / draws;
  double se = std::sqrt(mc * (1.0 - mc) / draws);
  CHECK(std::abs(computed - mc) <= 3.0 * se);
}

TEST_CASE("oscillatory integral and moment matching agree on mild weights", "[dimtest]") {
  struct Case {
    std::vector<double> w;
    int df;
  };
  std::vector<Case> cases = {
      {{0.9, 1.0, 1.2}, 3}, {{1.0, 1.3}, 3}, {{0.8, 1.1, 1.3}, 6}, {{1.0, 1.05}, 10},
      {{1.2, 1.2}, 4}};
  for (const auto& c : cases) {
    double mean = 0.0;
    for (double w : c.w) mean += w * c.df;
    for (int i = 0; i < 25; ++i) {
      double t = 0.1 * mean + (4.0 - 0.1) * mean * i / 24.0;
      double exact = sbss::weighted_chi2_pvalue(t, c.w, c.df);
      double approx = sbss::weighted_chi2_pvalue_moment(t, c.w, c.df);
      CAPTURE(c.w, c.df, t);
      CHECK(std::abs(exact - approx) <= 1e-3);
    }
  }
}

TEST_CASE("moment matching saturates at one below the support", "[dimtest]") {
  CHECK(sbss::weighted_chi2_pvalue_moment(0.0, {1.0, 2.0}, 3) == 1.0);
}

TEST_CASE("weighted tail requires positive weights", "[dimtest]") {
  CHECK_THROWS_AS(sbss::weighted_chi2_pvalue(1.0, {1.0, -2.0}, 3), sbss::ValidationError);
  CHECK_THROWS_AS(sbss::weighted_chi2_pvalue(1.0, {}, 3), sbss::ValidationError);
}

TEST_CASE("pure noise statistic has the chi-square mean", "[dimtest]") {
  sbss::Rng rng(303);
  auto kernels = KernelSet::make({Kernel::ring(0, 1)});
  const int reps = 400;
  double sum = 0.0;
  for (int rep = 0; rep < reps; ++rep) {
    SpatialSample sample = noise_grid_sample(20, 2, rng);
    auto res = sbss::asymptotic_test(sample, kernels, 0);
    REQUIRE(res.method == "asym");
    sum += res.stat;
  }
  // t_0 is asymptotically chi-square with 1*2*3/2 = 3 degrees of freedom
  CHECK(sum / reps == Catch::Approx(3.0).margin(0.45));
}

TEST_CASE("null p-values are uniform under the null", "[dimtest]") {
  sbss::Rng rng(404);
  auto kernels = KernelSet::make({Kernel::ring(0, 1)});
  std::vector<double> pvals;
  for (int rep = 0; rep < 500; ++rep) {
    SpatialSample sample = noise_grid_sample(30, 3, rng);
    pvals.push_back(sbss::asymptotic_test(sample, kernels, 0).p_value);
  }
  CHECK(ks_to_uniform(pvals) < 0.05);
}

TEST_CASE("statistics decrease in the hypothesized rank", "[dimtest]") {
  sbss::Rng rng(505);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5), Kernel::ring(1.5, 3)});
  for (int rep = 0; rep < 10; ++rep) {
    SpatialSample sample = noise_grid_sample(12, 4, rng);
    auto sol = sbss::fit(sample, kernels);
    double prev = sbss::statistic(sol, 0);
    for (int r = 1; r < 4; ++r) {
      double cur = sbss::statistic(sol, r);
      REQUIRE(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("statistic is invariant under mixing", "[dimtest]") {
  sbss::Rng rng(606);
  LocationSet loc = sbss::gen_coords(sbss::CoordPattern::Grid, 14, rng);
  sbss::LatentModel model;
  model.signals = {{2.0, 1.5}, {1.0, 1.0}};
  model.noise_count = 2;
  SpatialSample base = sbss::sample_field(loc, model, rng);
  Matrix omega(4, 4);
  omega << 1.5, 0.2, -0.4, 0.1,
           0.3, 1.1, 0.2, -0.2,
           -0.1, 0.4, 0.9, 0.3,
           0.2, -0.3, 0.1, 1.2;
  SpatialSample mixed(base.loc, (base.values * omega.transpose()).eval());
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5), Kernel::ring(1.5, 3)});
  auto sol_base = sbss::fit(base, kernels);
  auto sol_mixed = sbss::fit(mixed, kernels);
  for (int r = 0; r < 4; ++r) {
    double tb = sbss::statistic(sol_base, r);
    double tm = sbss::statistic(sol_mixed, r);
    REQUIRE(std::abs(tb - tm) <= 1e-8 * (1.0 + tb));
  }
}

TEST_CASE("overlapping kernel supports disable the chi-square route", "[dimtest]") {
  sbss::Rng rng(707);
  SpatialSample sample = noise_grid_sample(8, 2, rng);
  auto kernels = KernelSet::make({Kernel::ring(0, 2), Kernel::ring(1, 3)});
  CHECK_THROWS_AS(sbss::asymptotic_test(sample, kernels, 0), sbss::OverlappingKernelSupports);
}

TEST_CASE("ball kernels are refused unless explicitly allowed", "[dimtest]") {
  sbss::Rng rng(808);
  SpatialSample sample = noise_grid_sample(8, 2, rng);
  auto kernels = KernelSet::make({Kernel::ball(1.5)});
  CHECK_THROWS_AS(sbss::asymptotic_test(sample, kernels, 0), sbss::ValidationError);
  sbss::TestOptions opt;
  opt.allow_ball = true;
  auto res = sbss::asymptotic_test(sample, kernels, 0, opt);
  CHECK(res.p_value >= 0.0);
  CHECK(res.p_value <= 1.0);
}

TEST_CASE("single kernel unnormalized test agrees with the plain one", "[dimtest]") {
  sbss::Rng rng(909);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  for (int rep = 0; rep < 5; ++rep) {
    SpatialSample sample = noise_grid_sample(10, 3, rng);
    auto plain = sbss::asymptotic_test(sample, kernels, 1);
    sbss::TestOptions opt;
    opt.unnormalized = true;
    auto un = sbss::asymptotic_test(sample, kernels, 1, opt);
    CHECK(un.method == "asym-weighted");
    CHECK(std::abs(un.p_value - plain.p_value) < 1e-12);
    auto null = std::get<sbss::WeightedChiSquareNull>(un.null_model);
    REQUIRE(null.weights.size() == 1);
    CHECK(null.df_each == 3);
  }
}

TEST_CASE("test results carry the null descriptor", "[dimtest]") {
  sbss::Rng rng(111);
  SpatialSample sample = noise_grid_sample(10, 3, rng);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  auto res = sbss::asymptotic_test(sample, kernels, 1);
  CHECK(res.r == 1);
  CHECK(res.method == "asym");
  CHECK(res.stat >= 0.0);
  auto null = std::get<sbss::ChiSquareNull>(res.null_model);
  CHECK(null.df == 3);
  CHECK(res.p_value == Catch::Approx(sbss::chi2_sf(res.stat, 3.0)));
}

TEST_CASE("rank bounds are enforced before fitting", "[dimtest]") {
  sbss::Rng rng(112);
  SpatialSample sample = noise_grid_sample(6, 2, rng);
  auto kernels = KernelSet::make({Kernel::ring(0, 1.5)});
  CHECK_THROWS_AS(sbss::asymptotic_test(sample, kernels, 2), sbss::RankOutOfRange);
  CHECK_THROWS_AS(sbss::asymptotic_test(sample, kernels, -1), sbss::RankOutOfRange);
}
