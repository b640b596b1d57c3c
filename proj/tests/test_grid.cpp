#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "wgflow/grid.hpp"

using namespace wgf;

TEST_CASE("gradient of a constant field is zero") {
  auto grid = Grid::make_2d(-1.0, 1.0, 8, -2.0, 2.0, 6);
  const EdgeField g = gradient(Vector::Constant(grid->cells(), 3.7), grid);
  CHECK(g.values().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient of the coordinate field is one") {
  auto grid = Grid::make_1d(-4.0, 4.0, 16);
  Vector f(grid->cells());
  for (int i = 0; i < grid->cells(); ++i) f[i] = grid->center(i, 0);
  const EdgeField g = gradient(f, grid);
  for (int e = 0; e < grid->edge_count(); ++e)
    CHECK(g.values()[e] == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("gradient matches hand-computed differences on a 4-cell grid") {
  // h = 0.25; frozen field and its forward differences.
  auto grid = Grid::make_1d(0.0, 1.0, 4);
  Vector f(4);
  f << 0.3, -1.2, 0.7, 0.05;
  const EdgeField g = gradient(f, grid);
  CHECK(g.values()[0] == doctest::Approx(-6.0).epsilon(1e-14));
  CHECK(g.values()[1] == doctest::Approx(7.6).epsilon(1e-14));
  CHECK(g.values()[2] == doctest::Approx(-2.6).epsilon(1e-14));
}

TEST_CASE("divergence of a single unit edge flow") {
  // Unit spacing and volume: the (+1/h, -1/h, 0) pattern scaled by volume.
  auto grid = Grid::make_1d(0.0, 3.0, 3);
  Vector m = Vector::Zero(grid->edge_count());
  m[0] = 1.0;
  const GridSignedMeasure s = divergence(EdgeField(grid, m));
  CHECK(s.values()[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(s.values()[1] == doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(s.values()[2] == 0.0);
}

TEST_CASE("divergence of zero field is zero and sums vanish") {
  auto grid = Grid::make_2d(0.0, 1.0, 5, 0.0, 1.0, 4);
  CHECK(divergence(EdgeField::zero(grid)).values().cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector m(grid->edge_count());
  for (int e = 0; e < grid->edge_count(); ++e) m[e] = gauss(rng);
  const GridSignedMeasure s = divergence(EdgeField(grid, m));
  CHECK(std::abs(s.values().sum()) <= 1e-12);
}

TEST_CASE("gradient and divergence are adjoint up to rounding") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto grid : {Grid::make_1d(-2.0, 5.0, 37), Grid::make_2d(-1.0, 1.0, 64, 0.0, 3.0, 64)}) {
    Vector f(grid->cells()), m(grid->edge_count());
    for (int i = 0; i < grid->cells(); ++i) f[i] = gauss(rng);
    for (int e = 0; e < grid->edge_count(); ++e) m[e] = gauss(rng);
    const EdgeField mf(grid, m);
    const double lhs = edge_inner(gradient(f, grid), mf);
    const double rhs = -f.dot(divergence(mf).values());
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-13));
  }
}

TEST_CASE("gradient rejects mismatched fields") {
  auto grid = Grid::make_1d(0.0, 1.0, 8);
  CHECK_THROWS_AS(gradient(Vector::Zero(7), grid), GridMismatch);
  auto other = Grid::make_1d(0.0, 1.0, 9);
  Vector f = Vector::Zero(other->cells());
  CHECK_THROWS_AS(edge_inner(gradient(f, other), EdgeField::zero(grid)), GridMismatch);
}

TEST_CASE("weighted laplacian: uniform density gives the scaled graph laplacian") {
  auto grid = Grid::make_1d(0.0, 2.0, 4);
  const GridDensity rho = GridDensity::normalized(grid, Vector::Ones(4));
  const Eigen::MatrixXd L = Eigen::MatrixXd(weighted_laplacian(rho));
  // Uniform density value = 1/(b-a) = 0.5; weight per edge = 0.5 vol/h^2 = 1.
  Eigen::MatrixXd expected(4, 4);
  expected << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
  CHECK((L - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("weighted laplacian annihilates constants") {
  std::mt19937_64 rng(3);
  auto grid = Grid::make_2d(0.0, 1.0, 7, 0.0, 2.0, 5);
  const GridDensity rho = wgf::test::random_density(grid, rng);
  const Vector ones = Vector::Constant(grid->cells(), 4.2);
  CHECK((weighted_laplacian(rho) * ones).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("weighted laplacian matches the hand-assembled 3-cell matrix") {
  auto grid = Grid::make_1d(0.0, 3.0, 3);
  Vector masses(3);
  masses << 0.5, 0.25, 0.25;
  const GridDensity rho(grid, masses);
  // Densities equal masses (unit volume); theta = arithmetic means.
  Eigen::MatrixXd expected(3, 3);
  expected << 0.375, -0.375, 0.0, -0.375, 0.625, -0.25, 0.0, -0.25, 0.25;
  const Eigen::MatrixXd L = Eigen::MatrixXd(weighted_laplacian(rho));
  CHECK((L - expected).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("density and measure constructors enforce their invariants") {
  auto grid = Grid::make_1d(0.0, 1.0, 4);
  Vector bad = Vector::Constant(4, 0.3);
  CHECK_THROWS(GridDensity(grid, bad));  // sums to 1.2
  Vector neg(4);
  neg << 0.5, 0.6, -0.1, 0.0;
  CHECK_THROWS(GridDensity(grid, neg));
  Vector unbalanced = Vector::Constant(4, 0.1);
  CHECK_THROWS(GridSignedMeasure(grid, unbalanced));
}
