#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wgflow/grid.hpp"
#include "wgflow/potentials.hpp"

namespace wgf {

/// Experiment configuration parsed from a flat sectioned key-value file.
/// Unknown sections or keys are rejected; every default is recorded back into
/// the manifest for reproducibility.
struct ExperimentConfig {
  // [testcase]
  std::string name = "gaussian_ou";

  // [potential]
  std::string potential_type = "quadratic";  // quadratic | double_well
  double stiffness = 1.0;
  double center = 0.0;
  double well_a = 0.05;
  double well_b = 0.5;

  // [grid]
  int dim = 1;
  double lo = -6.0, hi = 6.0;
  int cells = 256;
  double lo_y = -6.0, hi_y = 6.0;
  int cells_y = 0;  // defaults to `cells` when dim = 2

  // [endpoints]  gaussian:mean,var | gibbs | file:path
  std::string rho0 = "gaussian:0.0,0.5";
  std::string rho1 = "gaussian:0.5,0.3";

  // [sweep]
  std::vector<double> taus = {0.2, 0.1, 0.05, 0.025};
  int k_per_segment = 64;

  // [solvers]
  double sinkhorn_eps = 1e-3;
  double dt_max = 1e-3;
  double jko_t = 0.5;
  std::vector<int> jko_n = {2, 4, 8, 16};

  // [particles]
  std::vector<int> particle_sizes = {100, 1000, 10000};
  int particle_seeds = 20;
  double particle_t = 0.5;
  double particle_dt = 2e-3;

  // [tolerances]
  double duality_rel = 1e-8;
  double entropic_rel = 0.05;
  double static_dynamic_rel = 0.05;

  // [run]
  std::uint64_t seed = 12345;
  bool reproducible = true;
  std::string out = "out";

  static ExperimentConfig from_file(const std::string& path);
  static ExperimentConfig from_string(const std::string& text);

  /// Canonical echo of the fully resolved configuration.
  std::string echo() const;

  GridPtr make_grid() const;
  AnalyticPotential make_potential() const;
  GridDensity make_density(const std::string& spec, const GridPtr& grid) const;
};

}  // namespace wgf
