#include "wgflow/jko.hpp"

#include <cmath>

#include "wgflow/defaults.hpp"

namespace wgf {

namespace {

double w2_sq_for_objective(const GridDensity& rho_bar, const GridDensity& rho0,
                           const JkoOptions& opts) {
  if (rho0.grid()->dim() == 1) {
    const double d = w2_exact(rho0, rho_bar).distance;
    return d * d;
  }
  SinkhornOptions sopts;
  sopts.debiased = true;
  const double d = w2_entropic(rho0, rho_bar, opts.eps_2d, sopts).distance_estimate;
  return d * d;
}

}  // namespace

double jko_objective(const GridDensity& rho_bar, const GridDensity& rho0,
                     const Potential& pot, double t, const JkoOptions& opts) {
  if (!(t > 0.0)) throw std::invalid_argument("jko_objective: t must be positive");
  require_same_grid(rho_bar.grid(), rho0.grid());
  require_same_grid(rho_bar.grid(), pot.grid());
  return free_energy(rho_bar, pot) - free_energy(rho0, pot) +
         w2_sq_for_objective(rho_bar, rho0, opts) / (2.0 * t);
}

JkoStepResult jko_step(const GridDensity& rho0, const Potential& pot, double t,
                       const JkoOptions& opts) {
  if (!(t > 0.0)) throw std::invalid_argument("jko_step: t must be positive");
  require_same_grid(rho0.grid(), pot.grid());
  const GridPtr& grid = rho0.grid();
  const int n = grid->cells();
  const double vol = grid->cell_volume();
  const double log_vol = std::log(vol);

  std::vector<int> rows;
  for (int i = 0; i < n; ++i)
    if (rho0.mass(i) > 0.0) rows.push_back(i);
  const int nr = static_cast<int>(rows.size());

  Eigen::MatrixXd c(nr, n);
  for (int r = 0; r < nr; ++r)
    for (int j = 0; j < n; ++j) c(r, j) = grid->sq_dist(rows[r], j);

  Vector loga(nr);
  for (int r = 0; r < nr; ++r) loga[r] = std::log(rho0.mass(rows[r]));

  double h_sq = 0.0;
  for (int ax = 0; ax < grid->dim(); ++ax)
    h_sq = std::max(h_sq, grid->spacing(ax) * grid->spacing(ax));
  const double floor_factor =
      opts.eps_floor_factor > 0.0 ? opts.eps_floor_factor : defaults::kJkoEpsFloorFactor;
  const double eps_floor = floor_factor * h_sq;
  const double eps_start = defaults::kJkoEpsStartFactor * h_sq;

  std::vector<double> levels;
  for (double e = std::max(1.0, eps_start); e > eps_start * 1.0000001; e *= 0.5)
    levels.push_back(e);  // coarse warm-start levels
  for (double e = eps_start; e > eps_floor * 1.0000001; e *= 0.5) levels.push_back(e);
  levels.push_back(eps_floor);

  Vector u = Vector::Zero(nr), v = Vector::Zero(n);
  Eigen::ArrayXd buf_n(n), buf_r(nr), lse_cols(n);
  JkoStepResult result{rho0, 0.0, 0.0, 0.0, 0, eps_floor, 0.0};

  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double eps = levels[li];
    const bool final_level = (li + 1 == levels.size());
    const double tol = final_level ? opts.marginal_tol : 1e-4;
    const double kappa = 2.0 * t / (eps + 2.0 * t);
    double residual = 0.0;
    int it = 0;
    for (; it < opts.max_sinkhorn_iterations; ++it) {
      for (int r = 0; r < nr; ++r) {
        buf_n = -c.row(r).transpose().array() / eps + v.array();
        const double mx = buf_n.maxCoeff();
        u[r] = loga[r] - (mx + std::log((buf_n - mx).exp().sum()));
      }
      for (int j = 0; j < n; ++j) {
        buf_r = -c.col(j).array() / eps + u.array();
        const double mx = buf_r.maxCoeff();
        lse_cols[j] = mx + std::log((buf_r - mx).exp().sum());
        v[j] = -kappa * (lse_cols[j] - log_vol + 1.0 + pot.psi()[j]);
      }
      residual = 0.0;
      for (int r = 0; r < nr; ++r) {
        buf_n = -c.row(r).transpose().array() / eps + u[r] + v.array();
        residual += std::abs(buf_n.exp().sum() - rho0.mass(rows[r]));
      }
      ++result.iterations;
      if (residual <= tol) break;
    }
    if (final_level) {
      result.marginal_residual = residual;
      if (residual > std::max(opts.marginal_tol, 1e-10) * 10.0 && residual > 1e-8)
        throw NonConvergence("jko_step: proximal sinkhorn residual above tolerance",
                             residual, static_cast<std::size_t>(result.iterations));
    }
  }

  Vector masses = (v.array() + lse_cols).exp().matrix();
  result.minimizer = GridDensity::normalized(grid, masses);
  result.entropy_term = free_energy(result.minimizer, pot);
  result.w2_term = w2_sq_for_objective(result.minimizer, rho0, opts) / (2.0 * t);
  result.objective = result.entropy_term - free_energy(rho0, pot) + result.w2_term;
  return result;
}

GridDensity jko_iterate(const GridDensity& rho0, const Potential& pot, double t, int n,
                        const JkoOptions& opts) {
  if (n < 1) throw std::invalid_argument("jko_iterate: need n >= 1");
  GridDensity rho = rho0;
  for (int k = 0; k < n; ++k) rho = jko_step(rho, pot, t / n, opts).minimizer;
  return rho;
}

}  // namespace wgf
