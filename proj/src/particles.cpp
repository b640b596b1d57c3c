#include "wgflow/particles.hpp"

#include <cmath>

#include "wgflow/static_ot.hpp"

namespace wgf {

std::uint64_t split_seed(std::uint64_t seed) {
  // splitmix64
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::pair<double, double> normal_pair(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u1 = 1.0 - unif(rng);  // in (0,1], keeps the log finite
  const double u2 = unif(rng);
  const double r = std::sqrt(-2.0 * std::log(u1));
  return {r * std::cos(2.0 * M_PI * u2), r * std::sin(2.0 * M_PI * u2)};
}

ParticleEnsemble ensemble_from_density(const GridDensity& rho, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("ensemble_from_density: need n >= 1");
  const GridPtr& grid = rho.grid();
  Vector cdf(grid->cells());
  double acc = 0.0;
  for (int i = 0; i < grid->cells(); ++i) {
    acc += rho.mass(i);
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ParticleEnsemble ens;
  ens.positions.resize(n, grid->dim());
  ens.rng_seed = split_seed(seed);
  for (int p = 0; p < n; ++p) {
    const double u = unif(rng) * acc;
    int lo = 0, hi = grid->cells() - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    for (int ax = 0; ax < grid->dim(); ++ax) ens.positions(p, ax) = grid->center(lo, ax);
  }
  return ens;
}

ParticleEnsemble ensemble_from_gaussian(int n, int dim, double mean, double variance,
                                        std::uint64_t seed) {
  if (n < 1 || dim < 1 || dim > 2)
    throw std::invalid_argument("ensemble_from_gaussian: bad n or dim");
  std::mt19937_64 rng(seed);
  const double sd = std::sqrt(variance);
  ParticleEnsemble ens;
  ens.positions.resize(n, dim);
  ens.rng_seed = split_seed(seed);
  for (int p = 0; p < n; ++p) {
    const auto [z0, z1] = normal_pair(rng);
    ens.positions(p, 0) = mean + sd * z0;
    if (dim == 2) ens.positions(p, 1) = mean + sd * z1;
  }
  return ens;
}

namespace {

double reflect_into(double x, double lo, double hi) {
  const double width = hi - lo;
  while (x < lo || x > hi) {
    if (x < lo) x = 2.0 * lo - x;
    if (x > hi) x = 2.0 * hi - x;
    if (!std::isfinite(x)) throw std::invalid_argument("reflect: non-finite position");
    (void)width;
  }
  return x;
}

}  // namespace

ParticleEnsemble simulate(const ParticleEnsemble& ensemble, const AnalyticPotential& pot,
                          const GridPtr& box, double t, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("simulate: dt must be positive");
  if (t < 0.0) throw std::invalid_argument("simulate: t must be nonnegative");
  ParticleEnsemble out = ensemble;
  if (t == 0.0) return out;
  const int dim = ensemble.dim();
  const int steps = static_cast<int>(std::ceil(t / dt - 1e-12));
  const double step_dt = t / steps;
  const double noise = std::sqrt(2.0 * step_dt);
  std::mt19937_64 rng(ensemble.rng_seed);
  for (int s = 0; s < steps; ++s) {
    for (int p = 0; p < ensemble.count(); ++p) {
      std::array<double, 2> x{out.positions(p, 0), dim == 2 ? out.positions(p, 1) : 0.0};
      const auto g = pot.grad(x, dim);
      const auto [z0, z1] = normal_pair(rng);
      x[0] += -g[0] * step_dt + noise * z0;
      if (dim == 2) x[1] += -g[1] * step_dt + noise * z1;
      for (int ax = 0; ax < dim; ++ax)
        x[ax] = reflect_into(x[ax], box->lo(ax), box->hi(ax));
      out.positions(p, 0) = x[0];
      if (dim == 2) out.positions(p, 1) = x[1];
    }
  }
  out.time = ensemble.time + t;
  out.rng_seed = split_seed(ensemble.rng_seed);
  return out;
}

EmpiricalDensity empirical_density(const ParticleEnsemble& ensemble, const GridPtr& grid) {
  if (ensemble.dim() != grid->dim())
    throw GridMismatch("empirical_density: dimension mismatch");
  Vector counts = Vector::Zero(grid->cells());
  int clipped = 0;
  for (int p = 0; p < ensemble.count(); ++p) {
    int cell = 0, stride = 1;
    bool outside = false;
    for (int ax = 0; ax < grid->dim(); ++ax) {
      int ix = static_cast<int>(
          std::floor((ensemble.positions(p, ax) - grid->lo(ax)) / grid->spacing(ax)));
      if (ix < 0) {
        ix = 0;
        outside = true;
      }
      if (ix >= grid->extent(ax)) {
        ix = grid->extent(ax) - 1;
        outside = true;
      }
      cell += ix * stride;
      stride *= grid->extent(ax);
    }
    counts[cell] += 1.0;
    if (outside) ++clipped;
  }
  return EmpiricalDensity{GridDensity::normalized(grid, counts), clipped};
}

std::vector<ConvergenceRow> empirical_convergence_report(
    const GridDensity& rho0, const AnalyticPotential& pot, const FPOperator& op,
    double t, double dt, const std::vector<int>& sizes, int seeds, std::uint64_t seed0) {
  const GridPtr& grid = rho0.grid();
  const GridDensity reference = evolve(rho0, op, t);
  std::vector<ConvergenceRow> rows;
  double prev_mean = 0.0;
  for (int n : sizes) {
    double sum = 0.0, sum_sq = 0.0;
    for (int s = 0; s < seeds; ++s) {
      const std::uint64_t seed = split_seed(seed0 + 0x1000UL * s + static_cast<std::uint64_t>(n));
      ParticleEnsemble ens = ensemble_from_density(rho0, n, seed);
      ens = simulate(ens, pot, grid, t, dt);
      const GridDensity emp = empirical_density(ens, grid).density;
      const double d = w2_exact(emp, reference).distance;
      sum += d;
      sum_sq += d * d;
    }
    ConvergenceRow row;
    row.n = n;
    row.mean_w2 = sum / seeds;
    const double var = std::max(0.0, sum_sq / seeds - row.mean_w2 * row.mean_w2);
    row.stderr_w2 = std::sqrt(var / std::max(1, seeds - 1));
    row.ratio_vs_prev = rows.empty() ? 0.0 : row.mean_w2 / prev_mean;
    prev_mean = row.mean_w2;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace wgf
