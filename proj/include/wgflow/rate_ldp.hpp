#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wgflow/dynamic_action.hpp"
#include "wgflow/functionals.hpp"
#include "wgflow/semigroup.hpp"
#include "wgflow/static_ot.hpp"

namespace wgf {

/// Three-segment curve realizing the limsup bound: heat-up of rho0 on
/// [0,eps], the eps-smoothed geodesic on [eps,1-eps], heat-down to rho1 on
/// [1-eps,1]. Junction densities are shared objects, so the concatenation is
/// continuous by construction.
struct RecoveryCurve {
  double epsilon = 0.0;
  DiscreteCurve curve;
  DiscreteCurve heat_up, smoothed, heat_down;
};

/// Transition probabilities p_tau(x_i, y_j) as densities per target cell
/// volume; rows integrate to one within 1e-8.
class TransitionKernel {
 public:
  TransitionKernel(GridPtr grid, Eigen::MatrixXd density, double tau);

  /// Kernel of the discrete semigroup, built by evolving one-hot densities.
  static TransitionKernel from_semigroup(const FPOperator& op, double tau);

  /// Analytic Ornstein-Uhlenbeck kernel (Psi = x^2/2): Gaussian with mean
  /// x e^-tau and variance 1-e^-2tau, truncated to the box and row-normalized.
  static TransitionKernel ou_analytic(const GridPtr& grid, double tau);

  const GridPtr& grid() const { return grid_; }
  double tau() const { return tau_; }
  const Eigen::MatrixXd& density() const { return density_; }

 private:
  GridPtr grid_;
  Eigen::MatrixXd density_;
  double tau_ = 0.0;
};

/// Fisher dissipation h(eps) = int_0^1 G(P_eps rho_t) dt along a geodesic,
/// with G in metric form and trapezoid quadrature in t.
double h_of_epsilon(const GeodesicCurve& geodesic, const FPOperator& op, double eps);

/// h sampled on the dyadic epsilon grid (largest first), shared by the
/// schedule and the sweep.
struct HTable {
  std::vector<double> eps;
  std::vector<double> h;
};
HTable h_table(const GeodesicCurve& geodesic, const FPOperator& op);

/// Generalized inverse eps(tau) = inf { eps in grid : g(eps) > tau } of
/// g(eps) = sqrt(eps / h(eps)). Returns 0 when the endpoints coincide.
double epsilon_schedule(const GeodesicCurve& geodesic, const FPOperator& op, double tau);
double epsilon_schedule(const HTable& table, double tau, bool endpoints_equal);

RecoveryCurve build_recovery_curve(const GridDensity& rho0, const GridDensity& rho1,
                                   const FPOperator& op, double tau, int k_per_segment);

/// Controlled action of the recovery curve: a certified upper bound for the
/// discrete rate functional.
double rate_upper(const GridDensity& rho0, const GridDensity& rho1, const FPOperator& op,
                  double tau, int k_per_segment = 64);

/// Analytic floor W2^2/(4 tau) + (F(rho1) - F(rho0))/2 that the action of
/// every feasible curve respects up to the discretization budget.
double rate_lower_reference(const GridDensity& rho0, const GridDensity& rho1,
                            const Potential& pot, double tau);

/// Static (Sanov) form: minimizes the relative entropy H(gamma | rho0 x p_tau)
/// over couplings with marginals rho0 and rho1_target, by Sinkhorn iterations
/// on the reference kernel.
struct StaticRateResult {
  double value = 0.0;
  Coupling coupling;
  int iterations = 0;
  double marginal_residual = 0.0;
};
StaticRateResult static_rate(const GridDensity& rho0, const GridDensity& rho1_target,
                             const TransitionKernel& kernel);

struct GammaSweepRecord {
  double tau = 0.0;
  double epsilon = 0.0;
  double i_upper = 0.0;
  double w2sq_over_4tau = 0.0;
  double gap = 0.0;          // i_upper - W2^2/(4 tau)
  double half_delta_f = 0.0;
  double err = 0.0;          // gap - half_delta_f
  double h_eps = 0.0;
  double seconds = 0.0;
  bool failed = false;
  std::string error;
};

std::vector<GammaSweepRecord> gamma_sweep(const GridDensity& rho0, const GridDensity& rho1,
                                          const Potential& pot, const FPOperator& op,
                                          const std::vector<double>& taus,
                                          int k_per_segment = 64);

/// Discretization budget tol_chain = C (dt + h^2) for the lower-bound chain.
double chain_tolerance(const GridPtr& grid, int k_per_segment);

/// Invariant check of a finished sweep; returns human-readable violations.
std::vector<std::string> validate_gamma_sweep(const std::vector<GammaSweepRecord>& records,
                                              double tol_chain);

}  // namespace wgf
