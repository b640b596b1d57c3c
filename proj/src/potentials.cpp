#include "wgflow/potentials.hpp"

namespace wgf {

GridDensity gaussian_density(const GridPtr& grid, double mean, double variance,
                             double mean_y, double variance_y) {
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_density: variance > 0");
  const double vy = variance_y > 0.0 ? variance_y : variance;
  const double my = mean_y;
  Vector w(grid->cells());
  for (int i = 0; i < grid->cells(); ++i) {
    const double dx = grid->center(i, 0) - mean;
    double e = dx * dx / (2.0 * variance);
    if (grid->dim() == 2) {
      const double dy = grid->center(i, 1) - my;
      e += dy * dy / (2.0 * vy);
    }
    w[i] = std::exp(-e);
  }
  return GridDensity::normalized(grid, w);
}

}  // namespace wgf
