#include "wgflow/rate_ldp.hpp"

#include <chrono>
#include <cmath>

namespace wgf {

TransitionKernel::TransitionKernel(GridPtr grid, Eigen::MatrixXd density, double tau)
    : grid_(std::move(grid)), density_(std::move(density)), tau_(tau) {
  if (density_.rows() != grid_->cells() || density_.cols() != grid_->cells())
    throw std::invalid_argument("TransitionKernel: shape mismatch");
  if ((density_.array() < 0.0).any())
    throw std::invalid_argument("TransitionKernel: negative entry");
  const double vol = grid_->cell_volume();
  for (int i = 0; i < density_.rows(); ++i) {
    const double rowmass = density_.row(i).sum() * vol;
    if (std::abs(rowmass - 1.0) > 1e-8)
      throw std::invalid_argument("TransitionKernel: row " + std::to_string(i) +
                                  " integrates to " + std::to_string(rowmass));
  }
}

TransitionKernel TransitionKernel::from_semigroup(const FPOperator& op, double tau) {
  const GridPtr& grid = op.grid();
  const int n = grid->cells();
  const double vol = grid->cell_volume();
  const int steps = static_cast<int>(std::ceil(tau / op.dt_max() - 1e-12));
  Evolver stepper(op, tau / steps);
  Eigen::MatrixXd dens(n, n);
  for (int i = 0; i < n; ++i) {
    Vector col = Vector::Zero(n);
    col[i] = 1.0;
    for (int s = 0; s < steps; ++s) col = stepper.step(col);
    col /= col.sum();  // pin the row mass against solver drift
    dens.row(i) = col.transpose() / vol;
  }
  return TransitionKernel(grid, std::move(dens), tau);
}

TransitionKernel TransitionKernel::ou_analytic(const GridPtr& grid, double tau) {
  if (grid->dim() != 1)
    throw std::invalid_argument("TransitionKernel::ou_analytic: 1D only");
  if (!(tau > 0.0)) throw std::invalid_argument("ou_analytic: tau must be positive");
  const int n = grid->cells();
  const double vol = grid->cell_volume();
  const double var = 1.0 - std::exp(-2.0 * tau);
  const double decay = std::exp(-tau);
  Eigen::MatrixXd dens(n, n);
  for (int i = 0; i < n; ++i) {
    const double mean = grid->center(i, 0) * decay;
    for (int j = 0; j < n; ++j) {
      const double d = grid->center(j, 0) - mean;
      dens(i, j) = std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
    }
    dens.row(i) /= dens.row(i).sum() * vol;
  }
  return TransitionKernel(grid, std::move(dens), tau);
}

double h_of_epsilon(const GeodesicCurve& geodesic, const FPOperator& op, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("h_of_epsilon: eps must be positive");
  const std::size_t m = geodesic.times.size();
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) {
    const GridDensity smoothed = evolve(geodesic.densities[i], op, eps);
    const ExtReal gi = fisher_information_metric(smoothed, op);
    if (gi.is_infinite)
      throw InfeasibleSupport("h_of_epsilon: infinite Fisher information after smoothing");
    g[i] = gi.value;
  }
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i)
    total += 0.5 * (g[i] + g[i + 1]) * (geodesic.times[i + 1] - geodesic.times[i]);
  return total;
}

HTable h_table(const GeodesicCurve& geodesic, const FPOperator& op) {
  HTable table;
  for (int k = 0; k < defaults::kEpsGridLevels; ++k)
    table.eps.push_back(defaults::kEpsGridTop * std::pow(0.5, k));
  const std::size_t m = geodesic.times.size();

  // Evolve every geodesic sample incrementally through the ascending
  // checkpoints, accumulating the trapezoid sums per level.
  std::vector<double> eps_asc(table.eps.rbegin(), table.eps.rend());
  std::vector<double> hsum(eps_asc.size(), 0.0);
  std::vector<double> gvals(eps_asc.size());
  std::vector<std::vector<double>> g_at(m, gvals);
  for (std::size_t i = 0; i < m; ++i) {
    GridDensity current = geodesic.densities[i];
    double reached = 0.0;
    for (std::size_t l = 0; l < eps_asc.size(); ++l) {
      current = evolve(current, op, eps_asc[l] - reached);
      reached = eps_asc[l];
      const ExtReal gi = fisher_information_metric(current, op);
      if (gi.is_infinite)
        throw InfeasibleSupport("h_table: infinite Fisher information after smoothing");
      g_at[i][l] = gi.value;
    }
  }
  table.h.resize(table.eps.size());
  for (std::size_t l = 0; l < eps_asc.size(); ++l) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < m; ++i)
      total += 0.5 * (g_at[i][l] + g_at[i + 1][l]) *
               (geodesic.times[i + 1] - geodesic.times[i]);
    hsum[l] = total;
  }
  for (std::size_t k = 0; k < table.eps.size(); ++k)
    table.h[k] = hsum[eps_asc.size() - 1 - k];
  return table;
}

double epsilon_schedule(const HTable& table, double tau, bool endpoints_equal) {
  if (endpoints_equal) return 0.0;
  if (!(tau > 0.0)) throw std::invalid_argument("epsilon_schedule: tau must be positive");
  // Scan the dyadic grid from the smallest eps upward; g is increasing, so the
  // first eps with g(eps) > tau is the generalized inverse.
  double best = -1.0;
  for (std::size_t k = table.eps.size(); k-- > 0;) {
    const double eps = table.eps[k];
    const double h = table.h[k];
    const double g = (h > 0.0) ? std::sqrt(eps / h) : std::numeric_limits<double>::max();
    if (g > tau) {
      best = eps;
      break;
    }
  }
  if (best < 0.0)
    throw ScheduleOutOfRange("epsilon_schedule: tau exceeds g at the largest epsilon");
  return best;
}

double epsilon_schedule(const GeodesicCurve& geodesic, const FPOperator& op, double tau) {
  const bool equal =
      (geodesic.densities.front().masses() - geodesic.densities.back().masses())
          .cwiseAbs()
          .maxCoeff() == 0.0;
  if (equal) return 0.0;
  return epsilon_schedule(h_table(geodesic, op), tau, false);
}

namespace {

DiscreteCurve concatenate_segments(const DiscreteCurve& a, const DiscreteCurve& b,
                                   const DiscreteCurve& c) {
  DiscreteCurve out;
  auto append = [&](const DiscreteCurve& seg, bool skip_first) {
    for (std::size_t i = skip_first ? 1 : 0; i < seg.times.size(); ++i) {
      out.times.push_back(seg.times[i]);
      out.densities.push_back(seg.densities[i]);
    }
  };
  append(a, false);
  append(b, true);
  append(c, true);
  out.validate();
  return out;
}

}  // namespace

RecoveryCurve build_recovery_curve(const GridDensity& rho0, const GridDensity& rho1,
                                   const FPOperator& op, double tau, int k_per_segment) {
  require_same_grid(rho0.grid(), rho1.grid());
  require_same_grid(rho0.grid(), op.grid());
  if (k_per_segment < 1)
    throw std::invalid_argument("build_recovery_curve: need k_per_segment >= 1");
  const int K = k_per_segment;

  GeodesicCurve geodesic = uniform_geodesic(rho0, rho1, K);
  const bool equal =
      (rho0.masses() - rho1.masses()).cwiseAbs().maxCoeff() == 0.0;

  RecoveryCurve rc;
  if (equal) {
    // Degenerate case: the constant curve, no smoothing.
    rc.epsilon = 0.0;
    rc.curve.times.resize(K + 1);
    for (int i = 0; i <= K; ++i) rc.curve.times[i] = static_cast<double>(i) / K;
    rc.curve.densities.assign(K + 1, rho0);
    rc.smoothed = rc.curve;
    return rc;
  }

  rc.epsilon = epsilon_schedule(h_table(geodesic, op), tau, false);
  const double eps = rc.epsilon;

  // Heat-up and heat-down chains P_{j eps/K}; the chain ends are reused
  // verbatim as the smoothed segment's endpoints.
  std::vector<GridDensity> chain0{rho0}, chain1{rho1};
  for (int j = 1; j <= K; ++j) {
    chain0.push_back(evolve(chain0.back(), op, eps / K));
    chain1.push_back(evolve(chain1.back(), op, eps / K));
  }

  rc.heat_up.times.resize(K + 1);
  rc.heat_up.densities = chain0;
  for (int j = 0; j <= K; ++j) rc.heat_up.times[j] = eps * j / K;

  rc.smoothed.times.resize(K + 1);
  rc.smoothed.densities.clear();
  rc.smoothed.densities.push_back(chain0.back());
  for (int i = 1; i < K; ++i)
    rc.smoothed.densities.push_back(evolve(geodesic.densities[i], op, eps));
  rc.smoothed.densities.push_back(chain1.back());
  for (int i = 0; i <= K; ++i)
    rc.smoothed.times[i] = eps + (1.0 - 2.0 * eps) * i / K;

  rc.heat_down.times.resize(K + 1);
  rc.heat_down.densities.assign(chain1.rbegin(), chain1.rend());
  for (int j = 0; j <= K; ++j) rc.heat_down.times[j] = 1.0 - eps + eps * j / K;

  rc.curve = concatenate_segments(rc.heat_up, rc.smoothed, rc.heat_down);
  return rc;
}

double rate_upper(const GridDensity& rho0, const GridDensity& rho1, const FPOperator& op,
                  double tau, int k_per_segment) {
  const RecoveryCurve rc = build_recovery_curve(rho0, rho1, op, tau, k_per_segment);
  const ActionValue action = controlled_action(rc.curve, op, tau);
  if (action.is_infinite)
    throw InfeasibleSupport("rate_upper: recovery curve has infinite action");
  return action.value;
}

double rate_lower_reference(const GridDensity& rho0, const GridDensity& rho1,
                            const Potential& pot, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("rate_lower_reference: tau > 0");
  const double w2 = w2_exact(rho0, rho1).distance;
  return w2 * w2 / (4.0 * tau) +
         0.5 * (free_energy(rho1, pot) - free_energy(rho0, pot));
}

StaticRateResult static_rate(const GridDensity& rho0, const GridDensity& rho1_target,
                             const TransitionKernel& kernel) {
  require_same_grid(rho0.grid(), rho1_target.grid());
  require_same_grid(rho0.grid(), kernel.grid());
  const GridPtr& grid = rho0.grid();
  const int n = grid->cells();
  const double vol = grid->cell_volume();

  std::vector<int> rows, cols;
  for (int i = 0; i < n; ++i)
    if (rho0.mass(i) > 0.0) rows.push_back(i);
  for (int j = 0; j < n; ++j)
    if (rho1_target.mass(j) > 0.0) cols.push_back(j);

  // Reference joint measure R = rho0 (x) p_tau, in log form on the support.
  const int nr = static_cast<int>(rows.size());
  const int nc = static_cast<int>(cols.size());
  Eigen::MatrixXd logR(nr, nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      const double k = kernel.density()(rows[r], cols[c]);
      if (k <= 0.0) {
        logR(r, c) = -std::numeric_limits<double>::infinity();
      } else {
        logR(r, c) = std::log(rho0.mass(rows[r])) + std::log(k * vol);
      }
    }
  for (int c = 0; c < nc; ++c)
    if (!(logR.col(c).maxCoeff() > -std::numeric_limits<double>::infinity()))
      throw InfeasibleTarget("static_rate: target mass unreachable by the kernel");

  Vector u = Vector::Zero(nr), v = Vector::Zero(nc);
  Vector loga(nr), logb(nc);
  for (int r = 0; r < nr; ++r) loga[r] = std::log(rho0.mass(rows[r]));
  for (int c = 0; c < nc; ++c) logb[c] = std::log(rho1_target.mass(cols[c]));

  constexpr int kMaxIter = 10000;
  constexpr double kTol = 1e-9;
  double residual = 0.0;
  int iterations = 0;
  Eigen::ArrayXd buf_c(nc), buf_r(nr);
  for (int it = 0; it < kMaxIter; ++it) {
    for (int r = 0; r < nr; ++r) {
      buf_c = logR.row(r).transpose().array() + v.array();
      const double mx = buf_c.maxCoeff();
      u[r] = loga[r] - (mx + std::log((buf_c - mx).exp().sum()));
    }
    for (int c = 0; c < nc; ++c) {
      buf_r = logR.col(c).array() + u.array();
      const double mx = buf_r.maxCoeff();
      v[c] = logb[c] - (mx + std::log((buf_r - mx).exp().sum()));
    }
    residual = 0.0;
    for (int r = 0; r < nr; ++r) {
      buf_c = logR.row(r).transpose().array() + u[r] + v.array();
      residual += std::abs(buf_c.exp().sum() - rho0.mass(rows[r]));
    }
    iterations = it + 1;
    if (residual <= kTol) break;
  }
  if (residual > kTol)
    throw NonConvergence("static_rate: sinkhorn residual above tolerance", residual,
                         static_cast<std::size_t>(iterations));

  // Primal relative entropy and the coupling itself.
  double value = 0.0;
  std::vector<CouplingEntry> entries;
  entries.reserve(static_cast<std::size_t>(nr) * nc);
  for (int r = 0; r < nr; ++r)
    for (int c = 0; c < nc; ++c) {
      const double lg = logR(r, c) + u[r] + v[c];
      const double g = std::exp(lg);
      if (g > 0.0) {
        value += g * (u[r] + v[c]);
        entries.push_back({rows[r], cols[c], g});
      }
    }
  return StaticRateResult{value,
                          Coupling(grid, std::move(entries), rho0.masses(),
                                   rho1_target.masses()),
                          iterations, residual};
}

double chain_tolerance(const GridPtr& grid, int k_per_segment) {
  double h_sq = 0.0;
  for (int ax = 0; ax < grid->dim(); ++ax)
    h_sq = std::max(h_sq, grid->spacing(ax) * grid->spacing(ax));
  return defaults::kChainC * (1.0 / k_per_segment + h_sq);
}

std::vector<GammaSweepRecord> gamma_sweep(const GridDensity& rho0, const GridDensity& rho1,
                                          const Potential& pot, const FPOperator& op,
                                          const std::vector<double>& taus,
                                          int k_per_segment) {
  const int K = k_per_segment;
  std::vector<GammaSweepRecord> records;

  const double w2 = w2_exact(rho0, rho1).distance;
  const double w2sq = w2 * w2;
  const double half_delta_f = 0.5 * (free_energy(rho1, pot) - free_energy(rho0, pot));
  const bool equal = (rho0.masses() - rho1.masses()).cwiseAbs().maxCoeff() == 0.0;

  GeodesicCurve geodesic = uniform_geodesic(rho0, rho1, K);
  HTable table;
  if (!equal) table = h_table(geodesic, op);

  for (double tau : taus) {
    GammaSweepRecord rec;
    rec.tau = tau;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rec.epsilon = epsilon_schedule(table, tau, equal);
      for (std::size_t k = 0; k < table.eps.size(); ++k)
        if (table.eps[k] == rec.epsilon) rec.h_eps = table.h[k];
      const double upper = rate_upper(rho0, rho1, op, tau, K);
      rec.i_upper = upper;
      rec.w2sq_over_4tau = w2sq / (4.0 * tau);
      rec.gap = upper - rec.w2sq_over_4tau;
      rec.half_delta_f = half_delta_f;
      rec.err = rec.gap - half_delta_f;
    } catch (const std::exception& ex) {
      rec.failed = true;
      rec.error = ex.what();
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::string> validate_gamma_sweep(const std::vector<GammaSweepRecord>& records,
                                              double tol_chain) {
  std::vector<std::string> violations;
  const GammaSweepRecord* prev = nullptr;
  for (const auto& rec : records) {
    if (rec.failed) {
      violations.push_back("tau=" + std::to_string(rec.tau) + " failed: " + rec.error);
      continue;
    }
    if (rec.gap < rec.half_delta_f - tol_chain)
      violations.push_back("tau=" + std::to_string(rec.tau) +
                           " violates the lower bound: gap=" + std::to_string(rec.gap) +
                           " target=" + std::to_string(rec.half_delta_f));
    if (prev && !prev->failed) {
      // err should not increase along the decreasing-tau sweep beyond a 10%
      // noise band of the previous magnitude.
      if (rec.err > prev->err + 0.1 * std::abs(prev->err) + tol_chain * 1e-2)
        violations.push_back("err increased from tau=" + std::to_string(prev->tau) +
                             " to tau=" + std::to_string(rec.tau));
    }
    prev = &rec;
  }
  return violations;
}

}  // namespace wgf
