#pragma once

#include <vector>

#include "wgflow/grid.hpp"

namespace wgf {

struct CouplingEntry {
  int i = 0;  // source cell
  int j = 0;  // target cell
  double mass = 0.0;
};

/// Joint probability with prescribed marginals, stored sparsely.
class Coupling {
 public:
  Coupling(GridPtr grid, std::vector<CouplingEntry> entries, const Vector& rho0,
           const Vector& rho1);

  const GridPtr& grid() const { return grid_; }
  const std::vector<CouplingEntry>& entries() const { return entries_; }
  double marginal_residual0() const { return residual0_; }
  double marginal_residual1() const { return residual1_; }

  /// Transport cost sum_ij gamma_ij |x_i - x_j|^2.
  double squared_cost() const;

 private:
  GridPtr grid_;
  std::vector<CouplingEntry> entries_;
  double residual0_ = 0.0;
  double residual1_ = 0.0;
};

struct W2Result {
  double distance = 0.0;  // W2, not squared
  Coupling coupling;
  Vector potential_source;  // Kantorovich duals: u_i + v_j <= |x_i - x_j|^2
  Vector potential_target;
};

/// Exact Wasserstein distance. 1D: monotone (quantile) coupling. 2D: a
/// transportation-simplex solve, limited to 4096 cells (SizeLimit beyond).
/// Optimality of the 2D solve is certified by dual feasibility.
W2Result w2_exact(const GridDensity& rho0, const GridDensity& rho1);

struct SinkhornOptions {
  bool debiased = false;
  double marginal_tol = 1e-8;  // L1 on the un-fixed marginal
  int max_iterations = 20000;  // per epsilon level
  double eps_scaling_start = 1.0;
  double eps_scaling_ratio = 0.5;
  double overrelaxation = 1.8;  // falls back toward 1 when the residual grows
};

struct EntropicResult {
  double distance_estimate = 0.0;
  Coupling coupling;
  int iterations = 0;
  double marginal_residual = 0.0;
  double eps = 0.0;
};

/// Log-domain Sinkhorn on the squared-distance cost with epsilon scaling.
/// With `debiased` set, the estimate subtracts the self-transport bias.
EntropicResult w2_entropic(const GridDensity& rho0, const GridDensity& rho1, double eps,
                           const SinkhornOptions& opts = {});

/// Time-sampled displacement interpolation between two densities.
struct GeodesicCurve {
  std::vector<double> times;
  std::vector<GridDensity> densities;
  double w2 = 0.0;  // distance between the endpoints
};

/// McCann interpolation: mass of an optimal coupling moves along straight
/// lines and is splat multilinearly back onto the grid. Exact quantile
/// coupling in 1D; simplex coupling in 2D. Endpoint times reproduce the
/// inputs exactly.
GeodesicCurve displacement_interpolation(const GridDensity& rho0, const GridDensity& rho1,
                                         const std::vector<double>& times);

/// Uniformly sampled geodesic with k+1 samples on [0,1].
GeodesicCurve uniform_geodesic(const GridDensity& rho0, const GridDensity& rho1, int k);

}  // namespace wgf
