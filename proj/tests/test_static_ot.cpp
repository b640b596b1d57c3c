#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "wgflow/potentials.hpp"
#include "wgflow/static_ot.hpp"

using namespace wgf;
using namespace wgf::test;

TEST_CASE("w2 of a density with itself is zero with a diagonal coupling") {
  auto grid = Grid::make_1d(-2.0, 2.0, 32);
  const GridDensity rho = gaussian_density(grid, 0.0, 0.4);
  const W2Result res = w2_exact(rho, rho);
  CHECK(res.distance == doctest::Approx(0.0).epsilon(1e-14));
  for (const auto& e : res.coupling.entries()) CHECK(e.i == e.j);
}

TEST_CASE("w2 between one-hot masses is the center distance") {
  auto grid = Grid::make_1d(0.0, 8.0, 8);
  Vector a = Vector::Zero(8), b = Vector::Zero(8);
  a[1] = 1.0;
  b[6] = 1.0;
  const W2Result res = w2_exact(GridDensity(grid, a), GridDensity(grid, b));
  CHECK(res.distance == doctest::Approx(5.0).epsilon(1e-13));
}

TEST_CASE("w2 matches the Gaussian closed form") {
  auto grid = Grid::make_1d(-8.0, 8.0, 512);
  const GridDensity rho0 = gaussian_density(grid, 0.0, 1.0);
  const GridDensity rho1 = gaussian_density(grid, 1.0, 1.0);
  const W2Result res = w2_exact(rho0, rho1);
  CHECK(res.distance * res.distance == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("1D dual potentials certify optimality") {
  std::mt19937_64 rng(3);
  auto grid = Grid::make_1d(-1.0, 1.0, 24);
  const GridDensity rho0 = random_density(grid, rng);
  const GridDensity rho1 = random_density(grid, rng);
  const W2Result res = w2_exact(rho0, rho1);
  // Dual feasibility and strong duality.
  double worst = -1e9;
  for (int i = 0; i < grid->cells(); ++i)
    for (int j = 0; j < grid->cells(); ++j)
      worst = std::max(worst, res.potential_source[i] + res.potential_target[j] -
                                  grid->sq_dist(i, j));
  CHECK(worst <= 1e-9);
  const double dual_value = res.potential_source.dot(rho0.masses()) +
                            res.potential_target.dot(rho1.masses());
  CHECK(dual_value == doctest::Approx(res.distance * res.distance).epsilon(1e-9));
}

TEST_CASE("triangle inequality on random 1D triples") {
  std::mt19937_64 rng(5);
  auto grid = Grid::make_1d(-1.0, 3.0, 40);
  for (int trial = 0; trial < 20; ++trial) {
    const GridDensity a = random_density(grid, rng);
    const GridDensity b = random_density(grid, rng);
    const GridDensity c = random_density(grid, rng);
    const double ab = w2_exact(a, b).distance;
    const double bc = w2_exact(b, c).distance;
    const double ac = w2_exact(a, c).distance;
    CHECK(ac <= ab + bc + 1e-10);
  }
}

TEST_CASE("2D exact solver decouples on product marginals") {
  // For separable quadratic cost and product measures the optimal cost is the
  // sum of the per-axis 1D costs: the 1D quantile solver provides the oracle.
  std::mt19937_64 rng(7);
  const int nx = 7, ny = 6;
  auto gx = Grid::make_1d(0.0, 1.0, nx);
  auto gy = Grid::make_1d(-1.0, 1.0, ny);
  auto grid = Grid::make_2d(0.0, 1.0, nx, -1.0, 1.0, ny);

  const GridDensity ax = random_density(gx, rng), bx = random_density(gx, rng);
  const GridDensity ay = random_density(gy, rng), by = random_density(gy, rng);

  Vector a(grid->cells()), b(grid->cells());
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      a[ix + nx * iy] = ax.mass(ix) * ay.mass(iy);
      b[ix + nx * iy] = bx.mass(ix) * by.mass(iy);
    }
  const W2Result res =
      w2_exact(GridDensity::normalized(grid, a), GridDensity::normalized(grid, b));
  const double dx = w2_exact(ax, bx).distance;
  const double dy = w2_exact(ay, by).distance;
  const double expected = dx * dx + dy * dy;
  CHECK(res.distance * res.distance == doctest::Approx(expected).epsilon(1e-9));

  // Dual certificate of the simplex solve.
  double worst = -1e9;
  for (int i = 0; i < grid->cells(); ++i) {
    if (a[i] <= 0.0) continue;
    for (int j = 0; j < grid->cells(); ++j) {
      if (b[j] <= 0.0) continue;
      worst = std::max(worst, res.potential_source[i] + res.potential_target[j] -
                                  grid->sq_dist(i, j));
    }
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("2D exact solver rejects oversized instances") {
  auto grid = Grid::make_2d(0.0, 1.0, 80, 0.0, 1.0, 80);
  const GridDensity rho = gaussian_density(grid, 0.5, 0.05, 0.5, 0.05);
  CHECK_THROWS_AS(w2_exact(rho, rho), SizeLimit);
}

TEST_CASE("entropic distance vanishes for identical marginals when debiased") {
  auto grid = Grid::make_1d(-3.0, 3.0, 64);
  const GridDensity rho = gaussian_density(grid, 0.3, 0.5);
  SinkhornOptions opts;
  opts.debiased = true;
  const EntropicResult res = w2_entropic(rho, rho, 1e-2, opts);
  CHECK(res.distance_estimate <= 1e-4);
}

TEST_CASE("entropic distance approaches the exact one as eps decreases") {
  auto grid = Grid::make_1d(-8.0, 8.0, 256);
  const GridDensity rho0 = gaussian_density(grid, 0.0, 1.0);
  const GridDensity rho1 = gaussian_density(grid, 1.0, 1.0);
  const double exact = w2_exact(rho0, rho1).distance;

  SinkhornOptions opts;
  opts.debiased = true;
  double prev_err = 1e18;
  for (double eps : {1e-1, 1e-2, 1e-3}) {
    const EntropicResult res = w2_entropic(rho0, rho1, eps, opts);
    CHECK(res.marginal_residual <= 1e-8);
    const double err = std::abs(res.distance_estimate - exact);
    CHECK(err < prev_err + 1e-12);
    prev_err = err;
    if (eps == 1e-3) CHECK(err / exact <= 1e-2);
  }
}

TEST_CASE("displacement interpolation returns the inputs at the endpoint times") {
  auto grid = Grid::make_1d(-4.0, 4.0, 64);
  const GridDensity rho0 = gaussian_density(grid, -1.0, 0.5);
  const GridDensity rho1 = gaussian_density(grid, 1.5, 0.7);
  const GeodesicCurve curve = displacement_interpolation(rho0, rho1, {0.0, 1.0});
  CHECK((curve.densities.front().masses() - rho0.masses()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((curve.densities.back().masses() - rho1.masses()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("two one-hot masses interpolate to the midpoint") {
  auto grid = Grid::make_1d(0.0, 9.0, 9);
  Vector a = Vector::Zero(9), b = Vector::Zero(9);
  a[1] = 1.0;
  b[7] = 1.0;
  const GeodesicCurve curve =
      displacement_interpolation(GridDensity(grid, a), GridDensity(grid, b), {0.5});
  // Midpoint of centers 1.5 and 7.5 is 4.5, the center of cell 4.
  CHECK(curve.densities[0].mass(4) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Gaussian displacement interpolation matches the closed form at t=1/2") {
  auto grid = Grid::make_1d(-8.0, 8.0, 512);
  const GridDensity rho0 = gaussian_density(grid, 0.0, 1.0);
  const GridDensity rho1 = gaussian_density(grid, 1.0, 1.0);
  const GeodesicCurve curve = displacement_interpolation(rho0, rho1, {0.5});
  const GridDensity& mid = curve.densities[0];
  double mean = 0.0, var = 0.0;
  for (int i = 0; i < grid->cells(); ++i) mean += mid.mass(i) * grid->center(i, 0);
  for (int i = 0; i < grid->cells(); ++i) {
    const double d = grid->center(i, 0) - mean;
    var += mid.mass(i) * d * d;
  }
  CHECK(std::abs(mean - 0.5) <= 1e-3);
  CHECK(std::abs(var - 1.0) <= 5e-3);
}

TEST_CASE("geodesics have approximately constant speed") {
  auto grid = Grid::make_1d(-8.0, 8.0, 256);
  const GridDensity rho0 = gaussian_density(grid, 0.0, 0.5);
  const GridDensity rho1 = gaussian_density(grid, 0.8, 0.9);
  const GeodesicCurve curve =
      displacement_interpolation(rho0, rho1, {0.0, 0.25, 0.5, 0.75, 1.0});
  const double total = curve.w2;
  for (std::size_t i = 0; i < curve.times.size(); ++i)
    for (std::size_t j = i + 1; j < curve.times.size(); ++j) {
      const double d = w2_exact(curve.densities[i], curve.densities[j]).distance;
      const double expected = (curve.times[j] - curve.times[i]) * total;
      CHECK(std::abs(d - expected) <= 1e-2 * total);
    }
}

TEST_CASE("2D interpolation splits a diagonal hop bilinearly and keeps the mean") {
  auto grid = Grid::make_2d(0.0, 6.0, 6, 0.0, 6.0, 6);
  Vector a = Vector::Zero(36), b = Vector::Zero(36);
  a[0] = 1.0;        // center (0.5, 0.5)
  b[5 + 6 * 5] = 1;  // center (5.5, 5.5)
  const GeodesicCurve curve =
      displacement_interpolation(GridDensity(grid, a), GridDensity(grid, b), {0.5});
  const GridDensity& mid = curve.densities[0];
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < 36; ++i) {
    mx += mid.mass(i) * grid->center(i, 0);
    my += mid.mass(i) * grid->center(i, 1);
  }
  CHECK(mx == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(my == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("coupling marginals stay within tolerance") {
  std::mt19937_64 rng(11);
  auto grid = Grid::make_1d(0.0, 1.0, 48);
  const GridDensity rho0 = random_density(grid, rng);
  const GridDensity rho1 = random_density(grid, rng);
  const W2Result res = w2_exact(rho0, rho1);
  CHECK(res.coupling.marginal_residual0() <= 1e-8);
  CHECK(res.coupling.marginal_residual1() <= 1e-8);
}

TEST_CASE("displacement convexity of the free energy along geodesics") {
  auto grid = Grid::make_1d(-8.0, 8.0, 512);
  const Potential pot = AnalyticPotential::quadratic(1.0).sample(grid);
  const GridDensity rho0 = gaussian_density(grid, 0.0, 0.5);
  const GridDensity rho1 = gaussian_density(grid, 1.0, 0.8);
  const GeodesicCurve curve =
      displacement_interpolation(rho0, rho1, {0.0, 0.25, 0.5, 0.75, 1.0});
  const double f0 = free_energy(rho0, pot);
  const double f1 = free_energy(rho1, pot);
  const double w2sq = curve.w2 * curve.w2;
  for (std::size_t k = 0; k < curve.times.size(); ++k) {
    const double t = curve.times[k];
    const double bound =
        (1.0 - t) * f0 + t * f1 - 0.5 * pot.lambda() * t * (1.0 - t) * w2sq;
    CHECK(free_energy(curve.densities[k], pot) <= bound + 5e-3);
  }
}
