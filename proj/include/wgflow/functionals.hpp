#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <optional>
#include <vector>

#include "wgflow/grid.hpp"

namespace wgf {

/// Result of a weighted H^-1 solve: the squared norm together with the
/// optimal test function (pressure) and the optimal momentum field, which
/// satisfy flux_m = theta(rho) .* grad(potential_f) and div(flux_m) = -s.
struct Hm1Solution {
  double norm_sq;
  Vector potential_f;
  EdgeField flux_m;
};

/// Free energy F(rho) = sum f log f vol + sum Psi f vol with f the density
/// values; zero-mass cells contribute zero.
double free_energy(const GridDensity& rho, const Potential& pot);

/// Relative Fisher information by edge quadrature of |grad g|^2 / g dnu with
/// g the density of rho relative to the Gibbs density. Edges touching the
/// boundary of {g > 0} are excluded from the sum; the one-sided difference
/// quotient on such edges triggers the infinite sentinel past 1e12.
ExtReal fisher_information_quadrature(const GridDensity& rho, const Potential& pot);

/// Factorized rho-weighted Laplacian pseudo-solver. Grounds one cell per
/// connected component of the positive-weight edge graph; balanced measures
/// solve exactly, unbalanced ones raise InfeasibleSupport.
class Hm1Operator {
 public:
  explicit Hm1Operator(const GridDensity& rho, int direct_solver_threshold = 10000);
  Hm1Operator(GridPtr grid, Vector edge_weights, int direct_solver_threshold = 10000);

  const GridPtr& grid() const { return grid_; }
  const Vector& theta() const { return theta_; }
  int component_count() const { return n_components_; }

  /// Solves L f = s with constants projected out (grounded representative).
  Vector solve(const GridSignedMeasure& s) const;
  double norm_sq(const GridSignedMeasure& s) const;
  double inner(const GridSignedMeasure& s1, const GridSignedMeasure& s2) const;
  Hm1Solution full_solution(const GridSignedMeasure& s) const;

 private:
  void check_feasible(const Vector& s) const;
  Vector solve_checked(const Vector& s) const;

  GridPtr grid_;
  Vector theta_;
  SparseMatrix laplacian_;  // ungrounded
  SparseMatrix grounded_;
  std::vector<int> component_;
  int n_components_ = 0;
  bool use_direct_ = true;
  std::unique_ptr<Eigen::SimplicialLDLT<SparseMatrix>> ldlt_;
};

/// Weighted H^-1(rho) norm in the dual form: s^T L_rho^+ s via a grounded
/// Laplacian solve.
Hm1Solution hm1_norm(const GridSignedMeasure& s, const GridDensity& rho);

/// Same norm in the flux (Benamou-Brenier) form: the minimum of
/// sum_e vol |m_e|^2 / theta_e over edge fields with div(m) = -s, computed
/// from the KKT system of the equality-constrained least-squares problem.
/// Independent of the dual route.
double hm1_norm_flux_form(const GridSignedMeasure& s, const GridDensity& rho);

/// Optimal momentum field of the flux form.
EdgeField hm1_flux_minimizer(const GridSignedMeasure& s, const GridDensity& rho);

/// Polarized inner product s1^T L_rho^+ s2.
double hm1_inner(const GridSignedMeasure& s1, const GridSignedMeasure& s2,
                 const GridDensity& rho);

/// Both sides of the HWI inequality
///   H(rho | nu) <= W2(rho, nu) sqrt(G(rho)) - (lambda/2) W2(rho, nu)^2
/// with nu the normalized Gibbs measure and H the relative entropy
/// F(rho) + log(gibbs mass). The caller supplies W2(rho, nu).
struct HwiReport {
  double relative_entropy = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // rhs - lhs; negative slack beyond tol flags a violation
  double w2 = 0.0;
  double fisher = 0.0;
  bool fisher_infinite = false;
  bool holds(double tol) const { return fisher_infinite || slack >= -tol; }
};

HwiReport hwi_check(const GridDensity& rho, const Potential& pot, double w2_to_nu);

}  // namespace wgf
