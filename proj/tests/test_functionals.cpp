#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "wgflow/functionals.hpp"
#include "wgflow/potentials.hpp"
#include "wgflow/static_ot.hpp"

using namespace wgf;
using namespace wgf::test;

namespace {

Potential quadratic_on(const GridPtr& grid) {
  return AnalyticPotential::quadratic(1.0).sample(grid);
}

}  // namespace

TEST_CASE("free energy of the Gibbs density is -log Z") {
  auto grid = Grid::make_1d(-6.0, 6.0, 128);
  const Potential pot = quadratic_on(grid);
  const GridDensity gibbs = pot.gibbs_density();
  const double z = pot.gibbs_mass();
  CHECK(free_energy(gibbs, pot) == doctest::Approx(-std::log(z)).epsilon(1e-12));
  CHECK(free_energy(gibbs, pot) ==
        doctest::Approx(free_energy_summation_oracle(gibbs, pot)).epsilon(1e-13));
}

TEST_CASE("free energy of a standard Gaussian under the quadratic potential") {
  auto grid = Grid::make_1d(-8.0, 8.0, 512);
  const Potential pot = quadratic_on(grid);
  const GridDensity rho = gaussian_density(grid, 0.0, 1.0);
  // -0.5 ln(2 pi e) + 1/2
  CHECK(free_energy(rho, pot) == doctest::Approx(-0.9189385332046727).epsilon(1e-3));
}

TEST_CASE("free energy of the uniform density is -log V") {
  auto grid = Grid::make_1d(-2.0, 6.0, 64);
  const Potential flat(grid, Vector::Zero(grid->cells()), 0.0);
  const GridDensity uni = GridDensity::normalized(grid, Vector::Ones(grid->cells()));
  CHECK(free_energy(uni, flat) == doctest::Approx(-std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("fisher quadrature vanishes at the Gibbs density") {
  auto grid = Grid::make_1d(-5.0, 5.0, 96);
  const Potential pot = quadratic_on(grid);
  const ExtReal g = fisher_information_quadrature(pot.gibbs_density(), pot);
  REQUIRE_FALSE(g.is_infinite);
  CHECK(g.value <= 1e-20);
}

TEST_CASE("fisher quadrature matches the Gaussian closed forms") {
  auto grid = Grid::make_1d(-8.0, 8.0, 512);
  const Potential pot = quadratic_on(grid);

  const ExtReal g1 = fisher_information_quadrature(gaussian_density(grid, 0.0, 0.5), pot);
  REQUIRE_FALSE(g1.is_infinite);
  CHECK(g1.value == doctest::Approx(0.5).epsilon(2e-2 / 0.5));

  const ExtReal g2 = fisher_information_quadrature(gaussian_density(grid, 0.3, 1.0), pot);
  REQUIRE_FALSE(g2.is_infinite);
  CHECK(std::abs(g2.value - 0.09) <= 2e-2);

  // Cross-check the closed form itself against a refined quadrature.
  auto fine = Grid::make_1d(-8.0, 8.0, 2048);
  const Potential fine_pot = quadratic_on(fine);
  const ExtReal g3 = fisher_information_quadrature(gaussian_density(fine, 0.4, 0.7), fine_pot);
  REQUIRE_FALSE(g3.is_infinite);
  CHECK(g3.value == doctest::Approx(gaussian_fisher(0.4, 0.7)).epsilon(1e-3));
}

TEST_CASE("fisher quadrature and the metric gap close under refinement") {
  // Documented empirically: both forms approach the closed-form value.
  double prev_err = 1e9;
  for (int n : {128, 256, 512}) {
    auto grid = Grid::make_1d(-8.0, 8.0, n);
    const Potential pot = quadratic_on(grid);
    const ExtReal g = fisher_information_quadrature(gaussian_density(grid, 0.0, 0.5), pot);
    REQUIRE_FALSE(g.is_infinite);
    const double err = std::abs(g.value - 0.5);
    CHECK(err < prev_err + 1e-12);
    prev_err = err;
  }
}

TEST_CASE("hm1 norm of zero is zero") {
  auto grid = Grid::make_1d(0.0, 1.0, 16);
  std::mt19937_64 rng(5);
  const GridDensity rho = random_density(grid, rng);
  const GridSignedMeasure zero(grid, Vector::Zero(grid->cells()));
  CHECK(hm1_norm(zero, rho).norm_sq == 0.0);
  CHECK(hm1_norm_flux_form(zero, rho) == 0.0);
}

TEST_CASE("hm1 norm satisfies the plug-in identity for weighted gradients") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto grid = Grid::make_2d(0.0, 1.0, 5, 0.0, 1.0, 5);
  for (int trial = 0; trial < 50; ++trial) {
    const GridDensity rho = random_density(grid, rng);
    Vector psi(grid->cells());
    for (int i = 0; i < grid->cells(); ++i) psi[i] = gauss(rng);
    const Vector theta = edge_density_weights(rho);
    const EdgeField weighted(grid, theta.cwiseProduct(gradient(psi, grid).values()));
    // s = -div(theta grad psi) = L psi; its norm is the Dirichlet energy.
    const GridSignedMeasure s(grid, Vector(-divergence(weighted).values()));
    double dirichlet = 0.0;
    const EdgeField gpsi = gradient(psi, grid);
    for (int e = 0; e < grid->edge_count(); ++e)
      dirichlet += theta[e] * gpsi.values()[e] * gpsi.values()[e] * grid->cell_volume();
    const double got = hm1_norm(s, rho).norm_sq;
    CHECK(std::abs(got - dirichlet) <= 1e-10 * std::max(1.0, dirichlet));
  }
}

TEST_CASE("hm1 norm matches the dense pseudoinverse oracle") {
  std::mt19937_64 rng(13);
  auto grid = Grid::make_1d(0.0, 1.0, 16);
  const GridDensity rho = GridDensity::normalized(grid, Vector::Ones(16));
  for (int trial = 0; trial < 10; ++trial) {
    const GridSignedMeasure s = random_zero_sum(grid, rng);
    const double expected = hm1_norm_pinv_oracle(s, rho);
    CHECK(hm1_norm(s, rho).norm_sq == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("hm1 solution fields satisfy their invariants") {
  std::mt19937_64 rng(17);
  auto grid = Grid::make_1d(-1.0, 1.0, 24);
  const GridDensity rho = random_density(grid, rng);
  const GridSignedMeasure s = random_zero_sum(grid, rng);
  const Hm1Solution sol = hm1_norm(s, rho);
  // flux is the weighted gradient of the potential and div(flux) = -s.
  const Vector resid = divergence(sol.flux_m).values() + s.values();
  CHECK(resid.cwiseAbs().maxCoeff() <= 1e-8 * s.values().cwiseAbs().maxCoeff());
  const Vector theta = edge_density_weights(rho);
  const Vector expect_flux = theta.cwiseProduct(gradient(sol.potential_f, grid).values());
  CHECK((sol.flux_m.values() - expect_flux).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("flux form equals the dual form") {
  std::mt19937_64 rng(19);
  for (auto grid : {Grid::make_1d(0.0, 1.0, 32), Grid::make_2d(0.0, 1.0, 5, 0.0, 2.0, 6)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const GridDensity rho = random_density(grid, rng);
      const GridSignedMeasure s = random_zero_sum(grid, rng);
      const double dual = hm1_norm(s, rho).norm_sq;
      const double flux = hm1_norm_flux_form(s, rho);
      CHECK(std::abs(dual - flux) <= 1e-8 * dual);
    }
  }
}

TEST_CASE("flux form matches the brute-force QP oracle on tiny grids") {
  std::mt19937_64 rng(23);
  for (auto grid : {Grid::make_1d(0.0, 1.0, 8), Grid::make_2d(0.0, 1.0, 2, 0.0, 1.0, 4)}) {
    for (int trial = 0; trial < 10; ++trial) {
      const GridDensity rho = random_density(grid, rng);
      const GridSignedMeasure s = random_zero_sum(grid, rng);
      const double oracle = hm1_flux_qp_oracle(s, rho);
      const double flux = hm1_norm_flux_form(s, rho);
      CHECK(std::abs(flux - oracle) <= 1e-9 * std::max(1.0, oracle));
    }
  }
}

TEST_CASE("flux form hand value for an adjacent one-hot pair") {
  // Two cells, h = vol = 0.5, uniform density 1, single edge: m = -1,
  // value = vol m^2 / theta = 0.5.
  auto grid = Grid::make_1d(0.0, 1.0, 2);
  const GridDensity rho = GridDensity::normalized(grid, Vector::Ones(2));
  Vector sv(2);
  sv << 1.0, -1.0;
  const GridSignedMeasure s(grid, sv);
  CHECK(hm1_norm_flux_form(s, rho) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(hm1_norm(s, rho).norm_sq == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("hm1 norm scales quadratically") {
  std::mt19937_64 rng(29);
  auto grid = Grid::make_1d(0.0, 1.0, 20);
  const GridDensity rho = random_density(grid, rng);
  const GridSignedMeasure s = random_zero_sum(grid, rng);
  const double base = hm1_norm(s, rho).norm_sq;
  const GridSignedMeasure scaled(grid, Vector(2.5 * s.values()));
  CHECK(hm1_norm(scaled, rho).norm_sq == doctest::Approx(2.5 * 2.5 * base).epsilon(1e-12));
}

TEST_CASE("hm1 inner product obeys polarization") {
  std::mt19937_64 rng(31);
  auto grid = Grid::make_1d(0.0, 1.0, 16);
  const GridDensity rho = random_density(grid, rng);
  const GridSignedMeasure s1 = random_zero_sum(grid, rng);
  const GridSignedMeasure s2 = random_zero_sum(grid, rng);
  const GridSignedMeasure zero(grid, Vector::Zero(16));

  CHECK(hm1_inner(s1, zero, rho) == 0.0);
  CHECK(hm1_inner(s1, s1, rho) == doctest::Approx(hm1_norm(s1, rho).norm_sq).epsilon(1e-12));

  const GridSignedMeasure sum(grid, Vector(s1.values() + s2.values()));
  const GridSignedMeasure diff(grid, Vector(s1.values() - s2.values()));
  const double pol =
      0.25 * (hm1_norm(sum, rho).norm_sq - hm1_norm(diff, rho).norm_sq);
  CHECK(hm1_inner(s1, s2, rho) == doctest::Approx(pol).epsilon(1e-10));
  CHECK(hm1_inner(s1, s2, rho) == doctest::Approx(hm1_inner(s2, s1, rho)).epsilon(1e-10));
}

TEST_CASE("hm1 norm signals infeasible support across zero-density gaps") {
  auto grid = Grid::make_1d(0.0, 1.0, 5);
  Vector masses(5);
  masses << 0.5, 0.0, 0.0, 0.0, 0.5;  // two islands separated by zero density
  const GridDensity rho(grid, masses);
  Vector sv = Vector::Zero(5);
  sv[0] = 1.0;
  sv[4] = -1.0;
  const GridSignedMeasure s(grid, sv);
  CHECK_THROWS_AS(hm1_norm(s, rho), InfeasibleSupport);
  CHECK_THROWS_AS(hm1_norm_flux_form(s, rho), InfeasibleSupport);
}

TEST_CASE("iterative fallback path agrees with the direct path") {
  std::mt19937_64 rng(37);
  auto grid = Grid::make_1d(0.0, 1.0, 40);
  const GridDensity rho = random_density(grid, rng);
  const GridSignedMeasure s = random_zero_sum(grid, rng);
  const Hm1Operator direct(rho);
  const Hm1Operator iterative(rho, /*direct_solver_threshold=*/0);
  CHECK(iterative.norm_sq(s) == doctest::Approx(direct.norm_sq(s)).epsilon(1e-9));
}

TEST_CASE("free energy is continuous along converging mass vectors") {
  // Lower semicontinuity surrogate on a fixed grid.
  std::mt19937_64 rng(41);
  auto grid = Grid::make_1d(-3.0, 3.0, 48);
  const Potential pot = quadratic_on(grid);
  const GridDensity rho = gaussian_density(grid, 0.2, 0.6);
  const GridDensity other = random_density(grid, rng);
  double liminf = std::numeric_limits<double>::infinity();
  for (int k = 17; k <= 22; ++k) {  // tail of the sequence rho_k -> rho
    const double delta = std::pow(0.25, k);
    const GridDensity mix(
        grid, Vector((1.0 - delta) * rho.masses() + delta * other.masses()));
    liminf = std::min(liminf, free_energy(mix, pot));
  }
  CHECK(free_energy(rho, pot) <= liminf + 1e-9);
}

TEST_CASE("hwi inequality holds on Gaussian test densities") {
  auto grid = Grid::make_1d(-8.0, 8.0, 256);
  const Potential pot = quadratic_on(grid);
  const GridDensity gibbs = pot.gibbs_density();

  SUBCASE("at the Gibbs density both sides vanish") {
    const HwiReport rep = hwi_check(gibbs, pot, 0.0);
    CHECK(std::abs(rep.relative_entropy) <= 1e-10);
    CHECK(std::abs(rep.rhs) <= 1e-10);
    CHECK(rep.holds(1e-9));
  }

  SUBCASE("narrow Gaussian") {
    const GridDensity rho = gaussian_density(grid, 0.0, 0.5);
    const double w2 = w2_exact(rho, gibbs).distance;
    const HwiReport rep = hwi_check(rho, pot, w2);
    CHECK(rep.holds(1e-6));
    CHECK(rep.slack > 0.0);
  }

  SUBCASE("shifted Gaussian") {
    const GridDensity rho = gaussian_density(grid, 1.0, 1.0);
    const double w2 = w2_exact(rho, gibbs).distance;
    const HwiReport rep = hwi_check(rho, pot, w2);
    CHECK(rep.holds(1e-6));
  }
}
