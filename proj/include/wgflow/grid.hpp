#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "wgflow/errors.hpp"

namespace wgf {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Directed grid edge between the cells `a < b` that are adjacent along `axis`.
struct Edge {
  std::int32_t a = 0;
  std::int32_t b = 0;
  std::int8_t axis = 0;
};

/// Regular cell-centered grid on a box in 1 or 2 dimensions. No edges cross
/// the boundary (no-flux). Immutable after construction; shared by reference.
class Grid {
 public:
  static std::shared_ptr<const Grid> make_1d(double lo, double hi, int n);
  static std::shared_ptr<const Grid> make_2d(double xlo, double xhi, int nx,
                                             double ylo, double yhi, int ny);

  int dim() const { return dim_; }
  int cells() const { return cells_; }
  int extent(int axis) const { return n_[axis]; }
  double lo(int axis) const { return lo_[axis]; }
  double hi(int axis) const { return hi_[axis]; }
  double spacing(int axis) const { return h_[axis]; }
  double cell_volume() const { return volume_; }

  const std::vector<Edge>& edges() const { return edges_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }

  /// Coordinate of a cell center along one axis.
  double center(int cell, int axis) const {
    const int ix = (axis == 0) ? cell % n_[0] : cell / n_[0];
    return lo_[axis] + (ix + 0.5) * h_[axis];
  }
  std::array<double, 2> center(int cell) const {
    std::array<double, 2> c{center(cell, 0), 0.0};
    if (dim_ == 2) c[1] = center(cell, 1);
    return c;
  }

  /// Squared Euclidean distance between two cell centers.
  double sq_dist(int i, int j) const {
    double d0 = center(i, 0) - center(j, 0);
    double d = d0 * d0;
    if (dim_ == 2) {
      double d1 = center(i, 1) - center(j, 1);
      d += d1 * d1;
    }
    return d;
  }

  bool same_as(const Grid& other) const;

 private:
  Grid() = default;

  int dim_ = 1;
  int cells_ = 0;
  std::array<int, 2> n_{0, 0};
  std::array<double, 2> lo_{0.0, 0.0};
  std::array<double, 2> hi_{0.0, 0.0};
  std::array<double, 2> h_{0.0, 0.0};
  double volume_ = 0.0;
  std::vector<Edge> edges_;
};

using GridPtr = std::shared_ptr<const Grid>;

void require_same_grid(const GridPtr& a, const GridPtr& b);

/// Probability masses on grid cells. Masses are nonnegative and sum to one
/// within 1e-12; the density value at a cell is mass / cell volume.
class GridDensity {
 public:
  GridDensity(GridPtr grid, Vector masses);

  /// Normalizes a nonnegative vector to total mass one.
  static GridDensity normalized(GridPtr grid, const Vector& weights);

  const GridPtr& grid() const { return grid_; }
  const Vector& masses() const { return masses_; }
  double mass(int i) const { return masses_[i]; }
  double density(int i) const { return masses_[i] / grid_->cell_volume(); }
  Vector densities() const { return masses_ / grid_->cell_volume(); }

 private:
  GridPtr grid_;
  Vector masses_;
};

/// Signed measure (mass units) summing to zero within 1e-10. These are the
/// distributions paired against test functions; constants lie in the kernel
/// of the pairing.
class GridSignedMeasure {
 public:
  GridSignedMeasure(GridPtr grid, Vector values);

  const GridPtr& grid() const { return grid_; }
  const Vector& values() const { return values_; }

 private:
  GridPtr grid_;
  Vector values_;
};

/// Momentum values (mass x velocity) on grid edges.
class EdgeField {
 public:
  EdgeField(GridPtr grid, Vector values);
  static EdgeField zero(GridPtr grid);

  const GridPtr& grid() const { return grid_; }
  const Vector& values() const { return values_; }

 private:
  GridPtr grid_;
  Vector values_;
};

/// Confining potential sampled at cell centers together with its convexity
/// modulus lambda (a user-supplied analytic guarantee, not verified here) and
/// the unnormalized Gibbs weights exp(-psi).
class Potential {
 public:
  Potential(GridPtr grid, Vector psi, double lambda);

  const GridPtr& grid() const { return grid_; }
  const Vector& psi() const { return psi_; }
  double lambda() const { return lambda_; }
  /// Per-cell unnormalized Gibbs density exp(-psi).
  const Vector& gibbs() const { return gibbs_; }
  /// Total Gibbs mass: sum of gibbs weights times cell volume.
  double gibbs_mass() const { return gibbs_mass_; }
  /// Gibbs weights normalized into a probability density.
  GridDensity gibbs_density() const;

 private:
  GridPtr grid_;
  Vector psi_;
  double lambda_;
  Vector gibbs_;
  double gibbs_mass_;
};

/// Per-edge value (f[b] - f[a]) / h_axis of a cell field f.
EdgeField gradient(const Vector& cell_field, const GridPtr& grid);

/// Negative adjoint of `gradient` with respect to the volume-weighted edge
/// inner product and the plain cell pairing. Output is in mass units and sums
/// to zero (no-flux boundary).
GridSignedMeasure divergence(const EdgeField& m);

/// Arithmetic mean of the adjacent cell densities, per edge. This is the
/// edge-weight rule used by the H^-1 norms and the dynamic action.
Vector edge_density_weights(const GridDensity& rho);

/// rho-weighted graph Laplacian L f = -div(theta(rho) .* grad f), assembled as
/// a sparse symmetric positive semidefinite matrix acting on cell fields and
/// producing mass-unit measures. Constants are in the kernel; the kernel is
/// exactly constants when rho is positive everywhere.
SparseMatrix weighted_laplacian(const GridDensity& rho);

/// Same assembly from an arbitrary per-edge weight vector (density units).
SparseMatrix weighted_laplacian_from_edge_weights(const GridPtr& grid,
                                                  const Vector& theta);

/// Volume-weighted inner product of two edge fields.
double edge_inner(const EdgeField& u, const EdgeField& w);

}  // namespace wgf
