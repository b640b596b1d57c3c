#pragma once

#include <optional>
#include <vector>

#include "wgflow/defaults.hpp"
#include "wgflow/grid.hpp"
#include "wgflow/semigroup.hpp"
#include "wgflow/static_ot.hpp"

namespace wgf {

/// Time-sampled curve of densities on [0,1]; the discrete stand-in for an
/// AC^2 curve. Momenta, when present, record the per-slice flux of the solver
/// that produced the curve.
struct DiscreteCurve {
  std::vector<double> times;
  std::vector<GridDensity> densities;
  std::vector<EdgeField> momenta;  // empty or one per slice

  int slices() const { return static_cast<int>(times.size()) - 1; }
  void validate() const;

  static DiscreteCurve from_geodesic(const GeodesicCurve& g);
};

/// Benamou-Brenier kinetic action: sum over slices of
/// dt * || (rho_{k+1} - rho_k)/dt ||^2_{-1, rho_mid} with midpoint densities.
ActionValue kinetic_action(const DiscreteCurve& curve);

/// Action of the tau-scaled optimal control problem: slice norms of
/// (rho_{k+1}-rho_k)/dt - tau A rho_mid, weighted by dt/(4 tau).
ActionValue controlled_action(const DiscreteCurve& curve, const FPOperator& op, double tau);

/// The three addends of the controlled action: kinetic/(4 tau), the entropy
/// cross term -1/2 int <d rho, A rho>, and (tau/4) int ||A rho||^2. All slice
/// norms share the midpoint weights, so the parts sum to the total exactly.
struct ActionDecomposition {
  ActionValue kinetic_over_4tau;
  ActionValue entropy_cross_term;
  ActionValue fisher_term;
  ActionValue total() const;
};

ActionDecomposition action_decomposition(const DiscreteCurve& curve, const FPOperator& op,
                                         double tau);

struct MinimizeOptions {
  bool kinetic_only = false;  // drop the tau A rho term: discrete BB problem
  int max_iterations = defaults::kPdhgMaxIterations;
  double gap_tol = defaults::kPdhgGapTol;
  double feasibility_tol = defaults::kPdhgFeasTol;
};

struct SolverDiagnostics {
  int iterations = 0;
  double primal_residual = 0.0;
  double duality_gap = 0.0;
  double solver_objective = 0.0;
  bool converged = false;
};

struct MinimizeResult {
  double value = 0.0;  // certified action of the returned curve
  DiscreteCurve curve;
  SolverDiagnostics diagnostics;
};

/// Minimizes the controlled action over interior densities and edge momenta
/// by a primal-dual (Chambolle-Pock) method; the quadratic-over-linear edge
/// terms are handled by perspective-function proximal steps with an auxiliary
/// interpolated edge density. The returned value re-evaluates the optimized
/// curve through the H^-1 slice norms, so it is a certified upper bound of
/// the discrete infimum. Intended for small instances (<= 64 cells, K <= 32).
MinimizeResult minimize_controlled_action(const GridDensity& rho0, const GridDensity& rho1,
                                          const FPOperator& op, double tau, int K,
                                          const MinimizeOptions& opts = {});

}  // namespace wgf
