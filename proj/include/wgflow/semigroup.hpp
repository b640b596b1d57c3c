#pragma once

#include <Eigen/SparseLU>
#include <memory>

#include "wgflow/defaults.hpp"
#include "wgflow/functionals.hpp"
#include "wgflow/grid.hpp"

namespace wgf {

/// B(z) = z / (e^z - 1), the exponential fitting factor of the
/// Scharfetter-Gummel flux; evaluated through expm1 with a series branch for
/// small arguments.
double bernoulli_b(double z);

/// Discrete Fokker-Planck generator d(rho)/dt = A rho on cell masses,
/// assembled from Scharfetter-Gummel edge fluxes. Columns sum to zero (mass
/// conservation), off-diagonal entries are nonnegative (M-matrix), and the
/// discrete Gibbs density spans the kernel.
class FPOperator {
 public:
  FPOperator(GridPtr grid, SparseMatrix generator, double dt_max);

  const GridPtr& grid() const { return grid_; }
  const SparseMatrix& matrix() const { return generator_; }
  double dt_max() const { return dt_max_; }

  Vector apply(const Vector& masses) const { return generator_ * masses; }
  GridSignedMeasure apply(const GridDensity& rho) const;

 private:
  GridPtr grid_;
  SparseMatrix generator_;
  double dt_max_;
};

FPOperator assemble_generator(const GridPtr& grid, const Potential& pot,
                              double dt_max = defaults::kDtMax);

/// Factorized implicit-Euler stepper (I - dt A) x_{k+1} = x_k for a fixed dt.
class Evolver {
 public:
  Evolver(const FPOperator& op, double dt);
  Vector step(const Vector& masses) const;
  double dt() const { return dt_; }

 private:
  double dt_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

/// Semigroup action P_t rho by implicit Euler with dt <= op.dt_max(), chosen
/// so the steps tile [0, t] exactly. evolve(rho, op, 0) returns rho.
GridDensity evolve(const GridDensity& rho, const FPOperator& op, double t);

/// Analytic Ornstein-Uhlenbeck moments for Psi = x^2/2: mean m0 e^-t and
/// variance 1 + (var0 - 1) e^-2t.
struct OuMoments {
  double mean = 0.0;
  double variance = 0.0;
};
OuMoments ou_reference(double m0, double var0, double t);

/// Fisher information in metric form: the squared H^-1(rho) norm of A rho.
ExtReal fisher_information_metric(const GridDensity& rho, const FPOperator& op);

/// Mean and variance of a grid density (first axis in 2D unless axis given).
double density_mean(const GridDensity& rho, int axis = 0);
double density_variance(const GridDensity& rho, int axis = 0);

}  // namespace wgf
