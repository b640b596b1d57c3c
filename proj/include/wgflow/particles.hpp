#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "wgflow/grid.hpp"
#include "wgflow/potentials.hpp"
#include "wgflow/semigroup.hpp"

namespace wgf {

/// Positions of n independent particles together with the seed of the stream
/// that advances them. Simulation is deterministic given the seed.
struct ParticleEnsemble {
  Eigen::MatrixXd positions;  // n x dim
  std::uint64_t rng_seed = 0;
  double time = 0.0;

  int count() const { return static_cast<int>(positions.rows()); }
  int dim() const { return static_cast<int>(positions.cols()); }
};

/// splitmix64 step, used to split deterministic per-ensemble streams.
std::uint64_t split_seed(std::uint64_t seed);

/// Standard normal pair by Box-Muller on the given engine (no cached state).
std::pair<double, double> normal_pair(std::mt19937_64& rng);

/// Samples n initial positions from a grid density (atoms at cell centers).
ParticleEnsemble ensemble_from_density(const GridDensity& rho, int n, std::uint64_t seed);

/// Samples n Gaussian initial positions (isotropic in 2D).
ParticleEnsemble ensemble_from_gaussian(int n, int dim, double mean, double variance,
                                        std::uint64_t seed);

/// Euler-Maruyama for dX = -grad Psi dt + sqrt(2) dW with reflecting walls at
/// the box edges. The returned ensemble carries a split seed so chained calls
/// draw fresh randomness.
ParticleEnsemble simulate(const ParticleEnsemble& ensemble, const AnalyticPotential& pot,
                          const GridPtr& box, double t, double dt);

/// Histogram of an ensemble on the grid; particles outside the box are
/// clipped to boundary cells and their count reported.
struct EmpiricalDensity {
  GridDensity density;
  int clipped = 0;
};
EmpiricalDensity empirical_density(const ParticleEnsemble& ensemble, const GridPtr& grid);

struct ConvergenceRow {
  int n = 0;
  double mean_w2 = 0.0;
  double stderr_w2 = 0.0;
  double ratio_vs_prev = 0.0;  // mean(n) / mean(prev n); ~ sqrt(prev/n) trend
};

/// W2 distance between the empirical measure at time t and the semigroup
/// solution, averaged over seeds, for each ensemble size.
std::vector<ConvergenceRow> empirical_convergence_report(
    const GridDensity& rho0, const AnalyticPotential& pot, const FPOperator& op,
    double t, double dt, const std::vector<int>& sizes, int seeds, std::uint64_t seed0);

}  // namespace wgf
