#pragma once

#include "wgflow/functionals.hpp"
#include "wgflow/grid.hpp"
#include "wgflow/static_ot.hpp"

namespace wgf {

struct JkoOptions {
  double eps_2d = 1e-2;          // entropic regularization for the 2D W2 term
  double eps_floor_factor = 0.0; // 0: use defaults::kJkoEpsFloorFactor * h^2
  int max_sinkhorn_iterations = 5000;
  double marginal_tol = 1e-10;
};

struct JkoStepResult {
  GridDensity minimizer;
  double objective = 0.0;     // J_t(minimizer | rho0)
  double w2_term = 0.0;       // W2^2 / (2t)
  double entropy_term = 0.0;  // F(minimizer)
  int iterations = 0;
  double final_eps = 0.0;
  double marginal_residual = 0.0;
};

/// J_t(rho_bar | rho0) = F(rho_bar) - F(rho0) + W2^2(rho0, rho_bar)/(2t);
/// exact W2 in 1D, debiased entropic W2 in 2D.
double jko_objective(const GridDensity& rho_bar, const GridDensity& rho0,
                     const Potential& pot, double t, const JkoOptions& opts = {});

/// One minimizing-movement step: argmin of J_t(. | rho0), solved by
/// Sinkhorn-based proximal splitting on the entropy-plus-potential objective
/// with annealed entropic regularization.
JkoStepResult jko_step(const GridDensity& rho0, const Potential& pot, double t,
                       const JkoOptions& opts = {});

/// n-fold composition of jko_step with step t/n.
GridDensity jko_iterate(const GridDensity& rho0, const Potential& pot, double t, int n,
                        const JkoOptions& opts = {});

}  // namespace wgf
