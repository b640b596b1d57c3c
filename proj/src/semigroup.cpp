#include "wgflow/semigroup.hpp"

#include <cmath>

namespace wgf {

double bernoulli_b(double z) {
  if (std::abs(z) < 1e-5) return 1.0 - 0.5 * z + z * z / 12.0;
  return z / std::expm1(z);
}

FPOperator::FPOperator(GridPtr grid, SparseMatrix generator, double dt_max)
    : grid_(std::move(grid)), generator_(std::move(generator)), dt_max_(dt_max) {
  if (!(dt_max_ > 0.0)) throw std::invalid_argument("FPOperator: dt_max must be positive");
}

GridSignedMeasure FPOperator::apply(const GridDensity& rho) const {
  require_same_grid(grid_, rho.grid());
  return GridSignedMeasure(grid_, generator_ * rho.masses());
}

FPOperator assemble_generator(const GridPtr& grid, const Potential& pot, double dt_max) {
  require_same_grid(grid, pot.grid());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid->edge_count()) * 4);
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e) {
    const int a = edges[e].a, b = edges[e].b;
    const double h = grid->spacing(edges[e].axis);
    const double c = 1.0 / (h * h);
    const double dpsi = pot.psi()[b] - pot.psi()[a];
    // flux(a->b) = c [B(dpsi) rho_a - B(-dpsi) rho_b]; vanishes on the Gibbs
    // weights since B(-z) = e^z B(z).
    const double out_a = c * bernoulli_b(dpsi);
    const double out_b = c * bernoulli_b(-dpsi);
    trips.emplace_back(a, a, -out_a);
    trips.emplace_back(b, a, out_a);
    trips.emplace_back(b, b, -out_b);
    trips.emplace_back(a, b, out_b);
  }
  SparseMatrix A(grid->cells(), grid->cells());
  A.setFromTriplets(trips.begin(), trips.end());
  return FPOperator(grid, std::move(A), dt_max);
}

Evolver::Evolver(const FPOperator& op, double dt) : dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("Evolver: dt must be positive");
  SparseMatrix system(op.grid()->cells(), op.grid()->cells());
  system.setIdentity();
  system -= dt * op.matrix();
  system.makeCompressed();
  lu_.compute(system);
  if (lu_.info() != Eigen::Success)
    throw LinearSolveFailure("Evolver: implicit Euler factorization failed");
}

Vector Evolver::step(const Vector& masses) const {
  Vector next = lu_.solve(masses);
  if (lu_.info() != Eigen::Success)
    throw LinearSolveFailure("Evolver: implicit Euler solve failed");
  // The system matrix is an M-matrix, so the exact solution is nonnegative;
  // clamp solver roundoff.
  const double floor = -1e-13 * std::max(1e-300, masses.maxCoeff());
  for (int i = 0; i < next.size(); ++i) {
    if (next[i] < 0.0) {
      if (next[i] < floor)
        throw LinearSolveFailure("Evolver: negative mass beyond roundoff");
      next[i] = 0.0;
    }
  }
  return next;
}

GridDensity evolve(const GridDensity& rho, const FPOperator& op, double t) {
  require_same_grid(rho.grid(), op.grid());
  if (t < 0.0) throw std::invalid_argument("evolve: t must be nonnegative");
  if (t == 0.0) return rho;
  const int steps = static_cast<int>(std::ceil(t / op.dt_max() - 1e-12));
  const double dt = t / steps;
  Evolver stepper(op, dt);
  Vector masses = rho.masses();
  for (int k = 0; k < steps; ++k) masses = stepper.step(masses);
  return GridDensity(rho.grid(), std::move(masses));
}

OuMoments ou_reference(double m0, double var0, double t) {
  if (!(var0 > 0.0)) throw std::invalid_argument("ou_reference: var0 must be positive");
  return {m0 * std::exp(-t), 1.0 + (var0 - 1.0) * std::exp(-2.0 * t)};
}

ExtReal fisher_information_metric(const GridDensity& rho, const FPOperator& op) {
  try {
    const GridSignedMeasure drift = op.apply(rho);
    return ExtReal::finite(Hm1Operator(rho).norm_sq(drift));
  } catch (const InfeasibleSupport&) {
    return ExtReal::infinite();
  }
}

double density_mean(const GridDensity& rho, int axis) {
  double m = 0.0;
  for (int i = 0; i < rho.grid()->cells(); ++i)
    m += rho.mass(i) * rho.grid()->center(i, axis);
  return m;
}

double density_variance(const GridDensity& rho, int axis) {
  const double m = density_mean(rho, axis);
  double v = 0.0;
  for (int i = 0; i < rho.grid()->cells(); ++i) {
    const double d = rho.grid()->center(i, axis) - m;
    v += rho.mass(i) * d * d;
  }
  return v;
}

}  // namespace wgf
