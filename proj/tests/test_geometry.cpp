#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <sbss/geometry.hpp>
#include <sbss/kernels.hpp>
#include <sbss/rng.hpp>

using sbss::Index;
using sbss::LocationSet;
using sbss::Matrix;

namespace {

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

Index index_of(const LocationSet& loc, double x, double y) {
  for (Index i = 0; i < loc.n(); ++i) {
    if (loc.coords()(i, 0) == x && loc.coords()(i, 1) == y) return i;
  }
  FAIL("point not found");
  return -1;
}

std::vector<sbss::WeightedPair> brute_force_pairs(const LocationSet& loc, const sbss::Kernel& k) {
  std::vector<sbss::WeightedPair> out;
  for (Index i = 0; i < loc.n(); ++i) {
    for (Index j = 0; j < loc.n(); ++j) {
      sbss::Vector lag = loc.coords().row(i) - loc.coords().row(j);
      double w = k(lag);
      if (w != 0.0) out.push_back({i, j, w});
    }
  }
  return out;
}

bool same_pairs(const std::vector<sbss::WeightedPair>& a, const std::vector<sbss::WeightedPair>& b) {
  auto key = [](const sbss::WeightedPair& p) { return std::make_tuple(p.i, p.j, p.weight); };
  std::vector<std::tuple<Index, Index, double>> ka, kb;
  for (const auto& p : a) ka.push_back(key(p));
  for (const auto& p : b) kb.push_back(key(p));
  std::sort(ka.begin(), ka.end());
  std::sort(kb.begin(), kb.end());
  return ka == kb;
}

}  // namespace

TEST_CASE("duplicate locations are rejected with the offending indices", "[geometry]") {
  Matrix c(3, 2);
  c << 0, 0, 1, 1, 0, 0;
  try {
    LocationSet loc(c);
    FAIL("expected ValidationError");
  } catch (const sbss::ValidationError& e) {
    std::string msg = e.what();
    CHECK(msg.find("0") != std::string::npos);
    CHECK(msg.find("2") != std::string::npos);
  }
}

TEST_CASE("minimum pairwise distance", "[geometry]") {
  Matrix c(3, 2);
  c << 0, 0, 3, 0, 0, 4;
  LocationSet loc(c);
  CHECK(loc.min_pairwise_distance() == Catch::Approx(3.0));
}

TEST_CASE("two nearby points give both ordered pairs and no diagonal", "[geometry]") {
  Matrix c(2, 2);
  c << 0, 0, 1, 0;
  LocationSet loc(c);
  auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::ring(0, 2));
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].i == 0);
  CHECK(pairs[0].j == 1);
  CHECK(pairs[0].weight == 1.0);
  CHECK(pairs[1].i == 1);
  CHECK(pairs[1].j == 0);
  CHECK(pairs[1].weight == 1.0);
}

TEST_CASE("a single point yields no pairs", "[geometry]") {
  Matrix c(1, 2);
  c << 0, 0;
  LocationSet loc(c);
  auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::ring(0, 2));
  CHECK(pairs.empty());
}

TEST_CASE("collinear triple keeps only pairs within the ring", "[geometry]") {
  Matrix c(3, 2);
  c << 0, 0, 1, 0, 3, 0;
  LocationSet loc(c);
  auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::ring(0, 2));
  auto brute = brute_force_pairs(loc, sbss::Kernel::ring(0, 2));
  CHECK(same_pairs(pairs, brute));
  std::set<std::pair<Index, Index>> got;
  for (const auto& p : pairs) got.insert({p.i, p.j});
  std::set<std::pair<Index, Index>> want = {{0, 1}, {1, 0}, {1, 2}, {2, 1}};
  CHECK(got == want);
}

TEST_CASE("pair listing is row-major ordered", "[geometry]") {
  Matrix c = full_grid(4);
  LocationSet loc(c);
  auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::ring(0, 1.5));
  for (std::size_t k = 1; k < pairs.size(); ++k) {
    bool ordered = pairs[k - 1].i < pairs[k].i ||
                   (pairs[k - 1].i == pairs[k].i && pairs[k - 1].j < pairs[k].j);
    REQUIRE(ordered);
  }
}

TEST_CASE("axis neighbors of an interior grid point", "[geometry]") {
  LocationSet loc(full_grid(11));
  Index center = index_of(loc, 5, 5);
  auto nb = sbss::grid_neighbors(loc, center, 1, 1);
  std::set<Index> got(nb.begin(), nb.end());
  std::set<Index> want = {index_of(loc, 4, 5), index_of(loc, 6, 5), index_of(loc, 5, 4),
                          index_of(loc, 5, 6)};
  CHECK(got == want);
}

TEST_CASE("diagonal neighbors of an interior grid point", "[geometry]") {
  LocationSet loc(full_grid(11));
  Index center = index_of(loc, 5, 5);
  auto nb = sbss::grid_neighbors(loc, center, 2, 1);
  std::set<Index> got(nb.begin(), nb.end());
  std::set<Index> want = {index_of(loc, 4, 4), index_of(loc, 4, 6), index_of(loc, 6, 4),
                          index_of(loc, 6, 6)};
  CHECK(got == want);
}

TEST_CASE("corner point keeps only in-sample neighbors", "[geometry]") {
  LocationSet loc(full_grid(11));
  Index center = index_of(loc, 0, 0);
  auto nb = sbss::grid_neighbors(loc, center, 1, 1);
  std::set<Index> got(nb.begin(), nb.end());
  std::set<Index> want = {index_of(loc, 1, 0), index_of(loc, 0, 1)};
  CHECK(got == want);
}

TEST_CASE("neighbor count never exceeds the lattice bound", "[geometry]") {
  LocationSet loc(full_grid(7));
  for (int m = 1; m <= 2; ++m) {
    double bound = (m == 1 ? 2.0 : 1.0) * std::pow(2.0, m);
    for (Index i = 0; i < loc.n(); ++i) {
      auto nb = sbss::grid_neighbors(loc, i, m, 1);
      REQUIRE(static_cast<double>(nb.size()) <= bound);
    }
  }
}

TEST_CASE("unit lattice is detected as regular", "[geometry]") {
  Matrix c(3, 2);
  c << 0, 0, 1, 0, 0, 1;
  auto gd = sbss::detect_grid(LocationSet(c));
  CHECK(gd.is_regular);
  CHECK(gd.spacing == Catch::Approx(1.0));
}

TEST_CASE("generic points are not a grid", "[geometry]") {
  Matrix c(2, 2);
  c << 0, 0, 0.5, 0.3;
  auto gd = sbss::detect_grid(LocationSet(c));
  CHECK_FALSE(gd.is_regular);
}

TEST_CASE("lattice with spacing two is detected", "[geometry]") {
  Matrix c(3, 2);
  c << 0, 0, 2, 0, 4, 2;
  auto gd = sbss::detect_grid(LocationSet(c));
  CHECK(gd.is_regular);
  // gcd of all successive coordinate differences is 2
  CHECK(gd.spacing == Catch::Approx(2.0));
  for (Index i = 0; i < 3; ++i) {
    for (int k = 0; k < 2; ++k) {
      CHECK(gd.origin(k) + gd.spacing * gd.integer_coords(i, k) ==
            Catch::Approx(c(i, k)).margin(1e-9));
    }
  }
}

TEST_CASE("lag kernel pairs agree with per-center neighbor queries", "[geometry]") {
  for (int side : {3, 5, 10}) {
    LocationSet loc(full_grid(side));
    for (int m = 1; m <= 2; ++m) {
      for (int h = 1; h <= 2; ++h) {
        auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::grid_lag(m, h));
        std::set<std::pair<Index, Index>> from_pairs;
        for (const auto& p : pairs) {
          REQUIRE(p.weight == 1.0);
          from_pairs.insert({p.i, p.j});
        }
        std::set<std::pair<Index, Index>> from_neighbors;
        for (Index i = 0; i < loc.n(); ++i) {
          for (Index j : sbss::grid_neighbors(loc, i, m, h)) from_neighbors.insert({i, j});
        }
        CAPTURE(side, m, h);
        CHECK(from_pairs == from_neighbors);
      }
    }
  }
}

TEST_CASE("pair listing is symmetric", "[geometry]") {
  sbss::Rng rng(3);
  Matrix c(40, 2);
  for (Index i = 0; i < 40; ++i) {
    c(i, 0) = 10.0 * rng.uniform01();
    c(i, 1) = 10.0 * rng.uniform01();
  }
  LocationSet loc(c);
  auto pairs = sbss::neighbor_pairs(loc, sbss::Kernel::ring(0.5, 2.5));
  std::set<std::tuple<Index, Index, double>> all;
  for (const auto& p : pairs) all.insert({p.i, p.j, p.weight});
  for (const auto& p : pairs) {
    REQUIRE(all.count({p.j, p.i, p.weight}) == 1);
  }
}

TEST_CASE("spatial hash search matches the double loop on large samples", "[geometry]") {
  sbss::Rng rng(21);
  const Index n = 400;  // above the brute-force cutoff
  Matrix c(n, 2);
  for (Index i = 0; i < n; ++i) {
    c(i, 0) = 25.0 * rng.uniform01();
    c(i, 1) = 25.0 * rng.uniform01();
  }
  LocationSet loc(c);
  for (const auto& k : {sbss::Kernel::ring(0, 2), sbss::Kernel::ring(1, 3), sbss::Kernel::ball(1.5)}) {
    auto fast = sbss::neighbor_pairs(loc, k);
    auto brute = brute_force_pairs(loc, k);
    CHECK(same_pairs(fast, brute));
  }
}

TEST_CASE("dimension limits are enforced", "[geometry]") {
  Matrix c(2, 4);
  c << 0, 0, 0, 0, 1, 1, 1, 1;
  CHECK_THROWS_AS(LocationSet(c), sbss::ValidationError);
}
