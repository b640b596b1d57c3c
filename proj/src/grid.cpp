#include "wgflow/grid.hpp"

#include <cmath>
#include <utility>

namespace wgf {

std::shared_ptr<const Grid> Grid::make_1d(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw std::invalid_argument("Grid: need n >= 2 and hi > lo");
  auto g = std::shared_ptr<Grid>(new Grid());
  g->dim_ = 1;
  g->n_ = {n, 1};
  g->lo_ = {lo, 0.0};
  g->hi_ = {hi, 0.0};
  g->h_ = {(hi - lo) / n, 0.0};
  g->cells_ = n;
  g->volume_ = g->h_[0];
  g->edges_.reserve(n - 1);
  for (int i = 0; i + 1 < n; ++i) g->edges_.push_back({i, i + 1, 0});
  return g;
}

std::shared_ptr<const Grid> Grid::make_2d(double xlo, double xhi, int nx,
                                          double ylo, double yhi, int ny) {
  if (nx < 2 || ny < 2 || !(xhi > xlo) || !(yhi > ylo))
    throw std::invalid_argument("Grid: need n >= 2 per axis and hi > lo");
  auto g = std::shared_ptr<Grid>(new Grid());
  g->dim_ = 2;
  g->n_ = {nx, ny};
  g->lo_ = {xlo, ylo};
  g->hi_ = {xhi, yhi};
  g->h_ = {(xhi - xlo) / nx, (yhi - ylo) / ny};
  g->cells_ = nx * ny;
  g->volume_ = g->h_[0] * g->h_[1];
  g->edges_.reserve(static_cast<std::size_t>((nx - 1) * ny + nx * (ny - 1)));
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix) {
      int c = ix + nx * iy;
      g->edges_.push_back({c, c + 1, 0});
    }
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix) {
      int c = ix + nx * iy;
      g->edges_.push_back({c, c + nx, 1});
    }
  return g;
}

bool Grid::same_as(const Grid& o) const {
  return dim_ == o.dim_ && n_ == o.n_ && lo_ == o.lo_ && hi_ == o.hi_;
}

void require_same_grid(const GridPtr& a, const GridPtr& b) {
  if (a.get() == b.get()) return;
  if (!a || !b || !a->same_as(*b)) throw GridMismatch("operands live on different grids");
}

GridDensity::GridDensity(GridPtr grid, Vector masses)
    : grid_(std::move(grid)), masses_(std::move(masses)) {
  if (masses_.size() != grid_->cells())
    throw std::invalid_argument("GridDensity: size mismatch");
  if ((masses_.array() < 0.0).any())
    throw std::invalid_argument("GridDensity: negative mass");
  const double total = masses_.sum();
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("GridDensity: total mass " + std::to_string(total));
}

GridDensity GridDensity::normalized(GridPtr grid, const Vector& weights) {
  if ((weights.array() < 0.0).any())
    throw std::invalid_argument("GridDensity::normalized: negative weight");
  const double total = weights.sum();
  if (!(total > 0.0)) throw std::invalid_argument("GridDensity::normalized: zero mass");
  Vector m = weights / total;
  m /= m.sum();  // second pass pins the float sum to 1
  return GridDensity(std::move(grid), std::move(m));
}

GridSignedMeasure::GridSignedMeasure(GridPtr grid, Vector values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->cells())
    throw std::invalid_argument("GridSignedMeasure: size mismatch");
  const double total = values_.sum();
  const double scale = values_.cwiseAbs().sum();
  if (std::abs(total) > 1e-10 * std::max(1.0, scale))
    throw std::invalid_argument("GridSignedMeasure: sum " + std::to_string(total));
}

EdgeField::EdgeField(GridPtr grid, Vector values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->edge_count())
    throw std::invalid_argument("EdgeField: size mismatch");
  if (!values_.allFinite()) throw std::invalid_argument("EdgeField: non-finite entry");
}

EdgeField EdgeField::zero(GridPtr grid) {
  Vector v = Vector::Zero(grid->edge_count());
  return EdgeField(std::move(grid), std::move(v));
}

Potential::Potential(GridPtr grid, Vector psi, double lambda)
    : grid_(std::move(grid)), psi_(std::move(psi)), lambda_(lambda) {
  if (psi_.size() != grid_->cells()) throw std::invalid_argument("Potential: size mismatch");
  gibbs_ = (-psi_.array()).exp();
  gibbs_mass_ = gibbs_.sum() * grid_->cell_volume();
}

GridDensity Potential::gibbs_density() const { return GridDensity::normalized(grid_, gibbs_); }

EdgeField gradient(const Vector& f, const GridPtr& grid) {
  if (f.size() != grid->cells()) throw GridMismatch("gradient: field size mismatch");
  if (!f.allFinite()) throw std::invalid_argument("gradient: non-finite field");
  Vector g(grid->edge_count());
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e)
    g[e] = (f[edges[e].b] - f[edges[e].a]) / grid->spacing(edges[e].axis);
  return EdgeField(grid, std::move(g));
}

GridSignedMeasure divergence(const EdgeField& m) {
  const GridPtr& grid = m.grid();
  Vector s = Vector::Zero(grid->cells());
  const double vol = grid->cell_volume();
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e) {
    const double flow = m.values()[e] * vol / grid->spacing(edges[e].axis);
    s[edges[e].a] += flow;
    s[edges[e].b] -= flow;
  }
  return GridSignedMeasure(grid, std::move(s));
}

Vector edge_density_weights(const GridDensity& rho) {
  const GridPtr& grid = rho.grid();
  Vector theta(grid->edge_count());
  const double vol = grid->cell_volume();
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e)
    theta[e] = 0.5 * (rho.mass(edges[e].a) + rho.mass(edges[e].b)) / vol;
  return theta;
}

SparseMatrix weighted_laplacian_from_edge_weights(const GridPtr& grid, const Vector& theta) {
  if (theta.size() != grid->edge_count())
    throw std::invalid_argument("weighted_laplacian: weight size mismatch");
  const double vol = grid->cell_volume();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(grid->edge_count()) * 4);
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e) {
    const double h = grid->spacing(edges[e].axis);
    const double w = theta[e] * vol / (h * h);
    const int a = edges[e].a, b = edges[e].b;
    trips.emplace_back(a, a, w);
    trips.emplace_back(b, b, w);
    trips.emplace_back(a, b, -w);
    trips.emplace_back(b, a, -w);
  }
  SparseMatrix L(grid->cells(), grid->cells());
  L.setFromTriplets(trips.begin(), trips.end());
  return L;
}

SparseMatrix weighted_laplacian(const GridDensity& rho) {
  return weighted_laplacian_from_edge_weights(rho.grid(), edge_density_weights(rho));
}

double edge_inner(const EdgeField& u, const EdgeField& w) {
  require_same_grid(u.grid(), w.grid());
  return u.values().dot(w.values()) * u.grid()->cell_volume();
}

}  // namespace wgf
