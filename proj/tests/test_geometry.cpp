#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "otlab/csv.hpp"
#include "otlab/geometry.hpp"

using namespace otlab;

namespace {

std::vector<double> sample(const Grid& g, auto&& f) {
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g.center(i));
  return v;
}

DensityField tent(int n) {
  const auto grid = Grid::line(0.0, 1.0, n);
  return DensityField(grid, sample(grid, [](Point p) { return std::max(0.0, 2.0 - std::abs(4.0 * p[0] - 2.0)); }));
}

}  // namespace

TEST(Grid, DerivedQuantities) {
  const auto g = Grid::box({0.0, -1.0}, {2.0, 1.0}, {4, 8});
  EXPECT_DOUBLE_EQ(g.width(0), 0.5);
  EXPECT_DOUBLE_EQ(g.width(1), 0.25);
  EXPECT_DOUBLE_EQ(g.cell_volume(), 0.125);
  EXPECT_EQ(g.size(), 32u);
  EXPECT_DOUBLE_EQ(g.diameter(), std::sqrt(8.0));
  EXPECT_DOUBLE_EQ(g.enclosing_radius(), std::sqrt(2.0));
  const auto c = g.center(g.index(1, 2));
  EXPECT_DOUBLE_EQ(c[0], 0.75);
  EXPECT_DOUBLE_EQ(c[1], -0.375);
}

TEST(Grid, RejectsInvalidBounds) {
  EXPECT_THROW(Grid::line(1.0, 1.0, 4), Error);
  EXPECT_THROW(Grid::line(0.0, 1.0, 0), Error);
  EXPECT_THROW(Grid(3, {0, 0}, {1, 1}, {4, 4}), Error);
}

TEST(Gradient, AffineIsExactInside) {
  const auto g = Grid::line(0.0, 1.0, 8);
  const auto grad = gradient(g, sample(g, [](Point p) { return p[0]; }));
  for (int i = 1; i < 7; ++i) EXPECT_DOUBLE_EQ(grad.values[i][0], 1.0);
}

TEST(Gradient, ConstantIsZero) {
  const auto g = Grid::box({0, 0}, {1, 1}, {6, 5});
  const auto grad = gradient(g, std::vector<double>(g.size(), 3.7));
  for (const auto& v : grad.values) {
    EXPECT_EQ(v[0], 0.0);
    EXPECT_EQ(v[1], 0.0);
  }
}

TEST(Gradient, SquareMatchesDerivative) {
  const auto g = Grid::line(0.0, 1.0, 256);
  const auto grad = gradient(g, sample(g, [](Point p) { return p[0] * p[0]; }));
  double worst = 0.0;
  for (int i = 1; i < 255; ++i) worst = std::max(worst, std::abs(grad.values[i][0] - 2.0 * g.center(i)[0]));
  EXPECT_LE(worst, 1e-3);
}

TEST(Gradient, LinearInInput) {
  const auto g = Grid::box({0, 0}, {1, 2}, {7, 9});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> f(g.size()), h(g.size()), mix(g.size());
    const double a = u(rng), b = u(rng);
    for (std::size_t i = 0; i < f.size(); ++i) {
      f[i] = u(rng);
      h[i] = u(rng);
      mix[i] = a * f[i] + b * h[i];
    }
    const auto gf = gradient(g, f), gh = gradient(g, h), gm = gradient(g, mix);
    for (std::size_t i = 0; i < f.size(); ++i)
      for (int k = 0; k < 2; ++k) EXPECT_NEAR(gm.values[i][k], a * gf.values[i][k] + b * gh.values[i][k], 1e-12);
  }
}

TEST(Gradient, ShapeMismatch) {
  const auto g = Grid::line(0.0, 1.0, 8);
  EXPECT_THROW(gradient(g, std::vector<double>(7, 0.0)), Error);
}

TEST(TotalVariation, ConstantIsZero) {
  const auto g = Grid::line(0.0, 1.0, 16);
  EXPECT_EQ(tv_norm(DensityField(g, std::vector<double>(16, 1.0))), 0.0);
}

TEST(TotalVariation, PositiveForNonConstant) {
  const auto g = Grid::box({0, 0}, {1, 1}, {5, 5});
  std::vector<double> v(g.size(), 1.0);
  v[12] = 1.5;
  EXPECT_GT(tv_norm(DensityField(g, v)), 0.0);
}

// The tent rises by 2 and falls by 2, so its total variation is 4.
TEST(TotalVariation, TentMatchesAnalyticValue) {
  EXPECT_NEAR(tv_norm(tent(512)), 4.0, 0.02 * 4.0);
}

TEST(TotalVariation, TentRefinementConverges) {
  double prev_err = std::abs(tv_norm(tent(64)) - 4.0);
  for (int n : {128, 256, 512, 1024}) {
    const double err = std::abs(tv_norm(tent(n)) - 4.0);
    EXPECT_LT(err, prev_err) << n;
    prev_err = err;
  }
}

TEST(TotalVariation, PositivelyHomogeneous) {
  const auto g = Grid::line(0.0, 1.0, 64);
  const auto d = random_smooth_density(g, 11, 4, 0.1);
  std::vector<double> scaled(d.values().begin(), d.values().end());
  for (double& x : scaled) x *= 3.5;
  EXPECT_NEAR(tv_norm(DensityField(g, scaled)), 3.5 * tv_norm(d), 1e-12);
}

TEST(Normalize, TwoUnitCells) {
  const auto g = Grid::line(0.0, 2.0, 2);
  const auto d = normalize(DensityField(g, {2.0, 2.0}));
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], 0.5);
}

TEST(Normalize, IdempotentAndRatioPreserving) {
  const auto g = Grid::box({0, 0}, {1, 1}, {8, 8});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  std::vector<double> v(g.size());
  for (double& x : v) x = u(rng);
  const auto once = normalize(DensityField(g, v));
  EXPECT_NEAR(once.mass(), 1.0, 1e-12);
  const auto twice = normalize(once);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_NEAR(twice[i], once[i], 1e-15);
    EXPECT_NEAR(once[i] / once[0], v[i] / v[0], 1e-12);
  }
}

TEST(Normalize, ZeroFieldIsDegenerate) {
  const auto g = Grid::line(0.0, 1.0, 4);
  try {
    normalize(DensityField(g, std::vector<double>(4, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_input);
  }
}

TEST(DensityField, RejectsNegativeValues) {
  EXPECT_THROW(DensityField(Grid::line(0, 1, 4), {1, -1, 1, 1}), Error);
}

TEST(RandomSmoothDensity, DeterministicPositiveNormalized) {
  const auto g = Grid::line(0.0, 1.0, 128);
  const auto s1 = sample_smooth_density(g, 7, 4, 0.1);
  const auto s2 = sample_smooth_density(g, 7, 4, 0.1);
  EXPECT_EQ(std::vector<double>(s1.density.values().begin(), s1.density.values().end()),
            std::vector<double>(s2.density.values().begin(), s2.density.values().end()));
  EXPECT_NEAR(s1.density.mass(), 1.0, 1e-12);
  for (double v : s1.density.values()) EXPECT_GE(v, s1.floor * (1 - 1e-14));
  EXPECT_GT(s1.floor, 0.0);
  const auto other = random_smooth_density(g, 8, 4, 0.1);
  EXPECT_NE(other[0], s1.density[0]);
}

TEST(RandomSmoothDensity, TwoDimensional) {
  const auto g = Grid::box({0, 0}, {1, 1}, {16, 16});
  const auto d = random_smooth_density(g, 3, 3, 0.2);
  EXPECT_NEAR(d.mass(), 1.0, 1e-12);
  EXPECT_GT(tv_norm(d), 0.0);
}

TEST(BoundaryFacets, OneDimensional) {
  const auto f = boundary_cells_and_normals(Grid::line(0.0, 1.0, 10));
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].cell, 0u);
  EXPECT_EQ(f[0].normal[0], -1.0);
  EXPECT_EQ(f[1].cell, 9u);
  EXPECT_EQ(f[1].normal[0], 1.0);
  EXPECT_EQ(f[0].area, 1.0);
}

TEST(BoundaryFacets, UnitSquarePerimeter) {
  const auto f = boundary_cells_and_normals(Grid::box({0, 0}, {1, 1}, {4, 4}));
  EXPECT_EQ(f.size(), 16u);
  double area = 0.0;
  for (const auto& e : f) {
    area += e.area;
    EXPECT_DOUBLE_EQ(norm(e.normal), 1.0);
  }
  EXPECT_DOUBLE_EQ(area, 4.0);
}

TEST(BoundaryFacets, LargerSquarePerimeter) {
  double area = 0.0;
  for (const auto& e : boundary_cells_and_normals(Grid::box({0, 0}, {2, 2}, {6, 6}))) area += e.area;
  EXPECT_DOUBLE_EQ(area, 8.0);
}

TEST(Interpolate, ReproducesAffineFunctions) {
  const auto g = Grid::box({0, 0}, {1, 2}, {5, 7});
  ScalarField f(g, sample(g, [](Point p) { return 2.0 * p[0] - 0.5 * p[1] + 1.0; }));
  for (Point p : {Point{0.3, 0.4}, Point{0.77, 1.5}, Point{0.5, 1.0}})
    EXPECT_NEAR(interpolate(f, p), 2.0 * p[0] - 0.5 * p[1] + 1.0, 1e-12);
}

TEST(WeightedQuantile, Basic) {
  const std::vector<double> v{3, 1, 2, 4}, w{1, 1, 1, 1};
  EXPECT_EQ(weighted_quantile(v, w, 0.5), 2.0);
  EXPECT_EQ(weighted_quantile(v, w, 0.95), 4.0);
}

TEST(FieldCsv, RoundTripPreservesGridAndValues) {
  for (const Grid& g : {Grid::line(-1.0, 2.0, 9), Grid::box({0, 1}, {1, 3}, {5, 4})}) {
    const auto d = random_smooth_density(g, 42, 3, 0.1);
    std::stringstream ss;
    write_field_csv(ss, g, d.values());
    const auto back = read_field_csv(ss);
    EXPECT_EQ(back.grid.dim(), g.dim());
    for (int a = 0; a < g.dim(); ++a) {
      EXPECT_EQ(back.grid.count(a), g.count(a));
      EXPECT_NEAR(back.grid.lower(a), g.lower(a), 1e-12);
      EXPECT_NEAR(back.grid.upper(a), g.upper(a), 1e-12);
    }
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(back.values[i], d[i]);
  }
}

TEST(FieldCsv, HeaderLayout) {
  std::stringstream ss;
  write_field_csv(ss, Grid::box({0, 0}, {1, 1}, {2, 2}), std::vector<double>{1, 2, 3, 4});
  std::string first;
  std::getline(ss, first);
  EXPECT_EQ(first, "x,y,value");
  std::getline(ss, first);
  EXPECT_EQ(first, "0.25,0.25,1");
  std::getline(ss, first);
  EXPECT_EQ(first, "0.75,0.25,2");
}

TEST(FieldCsv, RejectsBadHeader) {
  std::stringstream ss("a,b\n1,2\n");
  EXPECT_THROW(read_field_csv(ss), Error);
}
