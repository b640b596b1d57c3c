#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

#include "wgflow/grid.hpp"

namespace wgf {

/// Confining potential in closed form, evaluable off-grid (needed by the
/// particle simulator) and sampled onto grids (everything else).
/// quadratic:   psi(x) = (stiffness/2) |x - center|^2,  lambda = stiffness
/// double_well: psi(x) = sum_axis a x^4 - b x^2,        lambda = -2 b
class AnalyticPotential {
 public:
  static AnalyticPotential quadratic(double stiffness, double center = 0.0) {
    if (!(stiffness > 0.0))
      throw std::invalid_argument("quadratic potential: stiffness must be positive");
    AnalyticPotential p;
    p.kind_ = Kind::Quadratic;
    p.p0_ = stiffness;
    p.p1_ = center;
    p.lambda_ = stiffness;
    return p;
  }

  static AnalyticPotential double_well(double a, double b) {
    if (!(a > 0.0) || !(b > 0.0))
      throw std::invalid_argument("double well potential: need a, b > 0");
    AnalyticPotential p;
    p.kind_ = Kind::DoubleWell;
    p.p0_ = a;
    p.p1_ = b;
    p.lambda_ = -2.0 * b;
    return p;
  }

  double lambda() const { return lambda_; }

  double value(const std::array<double, 2>& x, int dim) const {
    double v = 0.0;
    for (int ax = 0; ax < dim; ++ax) v += value_1d(x[ax]);
    return v;
  }

  std::array<double, 2> grad(const std::array<double, 2>& x, int dim) const {
    std::array<double, 2> g{0.0, 0.0};
    for (int ax = 0; ax < dim; ++ax) g[ax] = grad_1d(x[ax]);
    return g;
  }

  /// Samples psi at cell centers into a grid Potential.
  Potential sample(const GridPtr& grid) const {
    Vector psi(grid->cells());
    for (int i = 0; i < grid->cells(); ++i)
      psi[i] = value(grid->center(i), grid->dim());
    return Potential(grid, std::move(psi), lambda_);
  }

 private:
  enum class Kind { Quadratic, DoubleWell };

  double value_1d(double x) const {
    if (kind_ == Kind::Quadratic) {
      const double d = x - p1_;
      return 0.5 * p0_ * d * d;
    }
    const double x2 = x * x;
    return p0_ * x2 * x2 - p1_ * x2;
  }

  double grad_1d(double x) const {
    if (kind_ == Kind::Quadratic) return p0_ * (x - p1_);
    return 4.0 * p0_ * x * x * x - 2.0 * p1_ * x;
  }

  Kind kind_ = Kind::Quadratic;
  double p0_ = 1.0;
  double p1_ = 0.0;
  double lambda_ = 1.0;
};

/// Gaussian masses at cell centers, normalized. In 2D the y-axis reuses the
/// x variance unless variance_y is given; the y mean defaults to 0.
GridDensity gaussian_density(const GridPtr& grid, double mean, double variance,
                             double mean_y = 0.0, double variance_y = 0.0);

}  // namespace wgf
