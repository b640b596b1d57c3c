#include "wgflow/dynamic_action.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "wgflow/functionals.hpp"

namespace wgf {

void DiscreteCurve::validate() const {
  if (times.size() < 2 || times.size() != densities.size())
    throw std::invalid_argument("DiscreteCurve: need K+1 times and densities");
  for (std::size_t k = 0; k + 1 < times.size(); ++k)
    if (!(times[k + 1] > times[k]))
      throw std::invalid_argument("DiscreteCurve: times must be strictly increasing");
  for (const auto& d : densities) require_same_grid(d.grid(), densities.front().grid());
  if (!momenta.empty() && momenta.size() + 1 != densities.size())
    throw std::invalid_argument("DiscreteCurve: need one momentum per slice");
}

DiscreteCurve DiscreteCurve::from_geodesic(const GeodesicCurve& g) {
  DiscreteCurve c;
  c.times = g.times;
  c.densities = g.densities;
  c.validate();
  return c;
}

namespace {

GridDensity midpoint_density(const GridDensity& a, const GridDensity& b) {
  return GridDensity(a.grid(), 0.5 * (a.masses() + b.masses()));
}

template <typename SliceNorm>
ActionValue accumulate_action(const DiscreteCurve& curve, SliceNorm&& slice_norm) {
  curve.validate();
  ActionValue out;
  for (int k = 0; k < curve.slices(); ++k) {
    const double dt = curve.times[k + 1] - curve.times[k];
    try {
      out.value += dt * slice_norm(k, dt);
    } catch (const InfeasibleSupport&) {
      out.is_infinite = true;
      out.infeasible_slices.push_back(static_cast<std::size_t>(k));
    }
  }
  if (out.is_infinite) out.value = 0.0;
  return out;
}

}  // namespace

ActionValue kinetic_action(const DiscreteCurve& curve) {
  return accumulate_action(curve, [&](int k, double dt) {
    const GridDensity mid = midpoint_density(curve.densities[k], curve.densities[k + 1]);
    const GridSignedMeasure rate(
        mid.grid(), (curve.densities[k + 1].masses() - curve.densities[k].masses()) / dt);
    return Hm1Operator(mid).norm_sq(rate);
  });
}

ActionValue controlled_action(const DiscreteCurve& curve, const FPOperator& op, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("controlled_action: tau must be positive");
  require_same_grid(curve.densities.front().grid(), op.grid());
  return accumulate_action(curve, [&](int k, double dt) {
    const GridDensity mid = midpoint_density(curve.densities[k], curve.densities[k + 1]);
    Vector dev = (curve.densities[k + 1].masses() - curve.densities[k].masses()) / dt -
                 tau * op.apply(mid.masses());
    const GridSignedMeasure deviation(mid.grid(), std::move(dev));
    return Hm1Operator(mid).norm_sq(deviation) / (4.0 * tau);
  });
}

ActionValue ActionDecomposition::total() const {
  ActionValue t;
  t.is_infinite = kinetic_over_4tau.is_infinite || entropy_cross_term.is_infinite ||
                  fisher_term.is_infinite;
  if (!t.is_infinite)
    t.value = kinetic_over_4tau.value + entropy_cross_term.value + fisher_term.value;
  t.infeasible_slices = kinetic_over_4tau.infeasible_slices;
  return t;
}

ActionDecomposition action_decomposition(const DiscreteCurve& curve, const FPOperator& op,
                                         double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("action_decomposition: tau must be positive");
  require_same_grid(curve.densities.front().grid(), op.grid());
  curve.validate();
  ActionDecomposition dec;
  for (int k = 0; k < curve.slices(); ++k) {
    const double dt = curve.times[k + 1] - curve.times[k];
    const GridDensity mid = midpoint_density(curve.densities[k], curve.densities[k + 1]);
    try {
      const Hm1Operator solver(mid);
      const GridSignedMeasure rate(
          mid.grid(), (curve.densities[k + 1].masses() - curve.densities[k].masses()) / dt);
      const GridSignedMeasure drift(mid.grid(), op.apply(mid.masses()));
      const Vector f_rate = solver.solve(rate);
      const Vector f_drift = solver.solve(drift);
      dec.kinetic_over_4tau.value += dt * rate.values().dot(f_rate) / (4.0 * tau);
      dec.entropy_cross_term.value += dt * (-0.5) * rate.values().dot(f_drift);
      dec.fisher_term.value += dt * (tau / 4.0) * drift.values().dot(f_drift);
    } catch (const InfeasibleSupport&) {
      dec.kinetic_over_4tau.is_infinite = true;
      dec.entropy_cross_term.is_infinite = true;
      dec.fisher_term.is_infinite = true;
      dec.kinetic_over_4tau.infeasible_slices.push_back(static_cast<std::size_t>(k));
    }
  }
  return dec;
}

// ---------------------------------------------------------------------------
// Primal-dual minimization.
// ---------------------------------------------------------------------------

namespace {

/// Proximal map of (m, a) -> eta * w * m^2 / a (a >= 0), by the cubic root of
/// (a - at)(a + 2 w eta)^2 = eta w mt^2 on (max(0, at), inf).
void perspective_prox(double w, double eta, double mt, double at, double* m, double* a) {
  if (mt == 0.0) {
    *m = 0.0;
    *a = std::max(at, 0.0);
    return;
  }
  const double s = 2.0 * w * eta;
  if (at <= 0.0 && mt * mt <= -4.0 * w * eta * at) {
    *m = 0.0;
    *a = 0.0;
    return;
  }
  const double rhs = eta * w * mt * mt;
  double lo = std::max(at, 0.0);
  double hi = lo + std::cbrt(rhs) + 1.0;
  auto P = [&](double x) { return (x - at) * (x + s) * (x + s) - rhs; };
  while (P(hi) < 0.0) hi = 2.0 * hi + 1.0;
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 80; ++it) {
    const double p = P(x);
    if (p > 0.0)
      hi = x;
    else
      lo = x;
    const double dp = (x + s) * (x + s) + 2.0 * (x - at) * (x + s);
    double xn = x - p / dp;
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    if (std::abs(xn - x) <= 1e-15 * (1.0 + std::abs(x))) {
      x = xn;
      break;
    }
    x = xn;
  }
  *a = x;
  *m = mt * x / (x + s);
}

}  // namespace

MinimizeResult minimize_controlled_action(const GridDensity& rho0, const GridDensity& rho1,
                                          const FPOperator& op, double tau, int K,
                                          const MinimizeOptions& opts) {
  require_same_grid(rho0.grid(), rho1.grid());
  require_same_grid(rho0.grid(), op.grid());
  if (!(tau > 0.0)) throw std::invalid_argument("minimize_controlled_action: tau > 0");
  if (K < 1 || K > 32) throw std::invalid_argument("minimize_controlled_action: K in [1,32]");
  const GridPtr& grid = rho0.grid();
  const int n = grid->cells();
  if (n > 64)
    throw SizeLimit("minimize_controlled_action: small-instance solver limited to 64 cells");

  const int ne = grid->edge_count();
  const double dt = 1.0 / K;
  const double vol = grid->cell_volume();
  const double scale = opts.kinetic_only ? 1.0 : 1.0 / (4.0 * tau);
  const double w = dt * vol * scale;  // objective weight per (slice, edge)

  // Variable layout: rho interior levels (K-1)*n, then m K*ne, then a K*ne.
  const int nrho = (K - 1) * n;
  const int nm = K * ne;
  const int nvar = nrho + 2 * nm;
  const int nrows = K * n + K * ne;
  auto rho_ix = [&](int level, int i) { return (level - 1) * n + i; };  // level 1..K-1
  auto m_ix = [&](int k, int e) { return nrho + k * ne + e; };
  auto a_ix = [&](int k, int e) { return nrho + nm + k * ne + e; };

  const SparseMatrix& A = op.matrix();
  const double tau_eff = opts.kinetic_only ? 0.0 : tau;

  // Constraint operator L and right-hand side b.
  std::vector<Eigen::Triplet<double>> trips;
  Vector b = Vector::Zero(nrows);
  const auto& edges = grid->edges();
  auto add_rho_block = [&](int row0, int level, double ddt_coef) {
    // ddt_coef/dt * I - (tau/2) A acting on rho_level, added at rows row0..
    if (level == 0 || level == K) {
      const Vector& pinned = (level == 0) ? rho0.masses() : rho1.masses();
      Vector contrib = (ddt_coef / dt) * pinned - 0.5 * tau_eff * (A * pinned);
      b.segment(row0, n) -= contrib;
      return;
    }
    for (int i = 0; i < n; ++i)
      trips.emplace_back(row0 + i, rho_ix(level, i), ddt_coef / dt);
    if (tau_eff != 0.0)
      for (int col = 0; col < A.outerSize(); ++col)
        for (SparseMatrix::InnerIterator it(A, col); it; ++it)
          trips.emplace_back(row0 + static_cast<int>(it.row()), rho_ix(level, col),
                             -0.5 * tau_eff * it.value());
  };
  for (int k = 0; k < K; ++k) {
    const int row0 = k * n;
    add_rho_block(row0, k, -1.0);
    add_rho_block(row0, k + 1, +1.0);
    for (int e = 0; e < ne; ++e) {
      const double d = vol / grid->spacing(edges[e].axis);
      trips.emplace_back(row0 + edges[e].a, m_ix(k, e), d);
      trips.emplace_back(row0 + edges[e].b, m_ix(k, e), -d);
    }
  }
  // Interpolation rows: a_{k,e} - (rho_k + rho_{k+1})_{ab} / (4 vol) ... = 0.
  auto add_interp = [&](int row0, int level, double coef) {
    if (level == 0 || level == K) {
      const Vector& pinned = (level == 0) ? rho0.masses() : rho1.masses();
      for (int e = 0; e < ne; ++e)
        b[row0 + e] -= coef * (pinned[edges[e].a] + pinned[edges[e].b]);
      return;
    }
    for (int e = 0; e < ne; ++e) {
      trips.emplace_back(row0 + e, rho_ix(level, edges[e].a), coef);
      trips.emplace_back(row0 + e, rho_ix(level, edges[e].b), coef);
    }
  };
  for (int k = 0; k < K; ++k) {
    const int row0 = K * n + k * ne;
    for (int e = 0; e < ne; ++e) trips.emplace_back(row0 + e, a_ix(k, e), 1.0);
    add_interp(row0, k, -0.25 / vol);
    add_interp(row0, k + 1, -0.25 / vol);
  }

  SparseMatrix L(nrows, nvar);
  L.setFromTriplets(trips.begin(), trips.end());
  SparseMatrix Lt = L.transpose();

  // Operator norm estimate via power iteration.
  Vector pv = Vector::Ones(nvar).normalized();
  double norm_sq = 1.0;
  for (int it = 0; it < 50; ++it) {
    Vector q = Lt * (L * pv).eval();
    norm_sq = q.norm();
    if (norm_sq == 0.0) break;
    pv = q / norm_sq;
  }
  const double step = 0.95 / std::sqrt(std::max(norm_sq, 1e-12));
  const double eta = step, sigma = step;

  // Initial point: linear interpolation of the endpoints, zero momentum.
  Vector x = Vector::Zero(nvar);
  for (int level = 1; level < K; ++level) {
    const double t = static_cast<double>(level) / K;
    Vector r = (1.0 - t) * rho0.masses() + t * rho1.masses();
    for (int i = 0; i < n; ++i) x[rho_ix(level, i)] = r[i];
  }
  auto theta_of_levels = [&](int k, const Vector& xv, int e) {
    auto level_mass = [&](int level, int cell) -> double {
      if (level == 0) return rho0.masses()[cell];
      if (level == K) return rho1.masses()[cell];
      return xv[rho_ix(level, cell)];
    };
    return (level_mass(k, edges[e].a) + level_mass(k, edges[e].b) +
            level_mass(k + 1, edges[e].a) + level_mass(k + 1, edges[e].b)) /
           (4.0 * vol);
  };
  for (int k = 0; k < K; ++k)
    for (int e = 0; e < ne; ++e) x[a_ix(k, e)] = theta_of_levels(k, x, e);

  Vector y = Vector::Zero(nrows);
  Vector x_bar = x;

  const double b_scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  const double amax = 0.5 / vol;  // masses are at most one in total

  SolverDiagnostics diag;
  double primal_obj = 0.0;
  for (int it = 0; it < opts.max_iterations; ++it) {
    y += sigma * (L * x_bar - b);
    Vector grad = Lt * y;
    Vector x_new = x - eta * grad;
    for (int i = 0; i < nrho; ++i) x_new[i] = std::max(0.0, x_new[i]);
    for (int k = 0; k < K; ++k)
      for (int e = 0; e < ne; ++e) {
        double mo, ao;
        perspective_prox(w, eta, x_new[m_ix(k, e)], x_new[a_ix(k, e)], &mo, &ao);
        x_new[m_ix(k, e)] = mo;
        x_new[a_ix(k, e)] = ao;
      }
    x_bar = 2.0 * x_new - x;
    x = x_new;
    diag.iterations = it + 1;

    if ((it + 1) % 50 == 0 || it + 1 == opts.max_iterations) {
      const Vector resid = L * x - b;
      diag.primal_residual = resid.cwiseAbs().maxCoeff() / b_scale;
      primal_obj = 0.0;
      for (int k = 0; k < K; ++k)
        for (int e = 0; e < ne; ++e) {
          const double mv = x[m_ix(k, e)], av = x[a_ix(k, e)];
          if (av > 0.0)
            primal_obj += w * mv * mv / av;
        }
      // Dual lower bound with explicit penalties for cone violations.
      double dual = y.dot(b);
      for (int k = 0; k < K; ++k)
        for (int e = 0; e < ne; ++e) {
          const double pm = grad[m_ix(k, e)];
          const double pa = grad[a_ix(k, e)];
          dual -= amax * std::max(0.0, pa + pm * pm / (4.0 * w));
        }
      for (int i = 0; i < nrho; ++i) dual -= std::max(0.0, grad[i]);
      const double obj_scale = std::max(1.0, std::abs(primal_obj));
      diag.duality_gap = (primal_obj - dual) / obj_scale;
      diag.solver_objective = primal_obj;
      if (diag.primal_residual <= opts.feasibility_tol &&
          std::abs(diag.duality_gap) <= opts.gap_tol) {
        diag.converged = true;
        break;
      }
    }
  }

  if (!diag.converged &&
      (diag.primal_residual > 1e-5 || diag.duality_gap > 5e-2))
    throw NonConvergence("minimize_controlled_action: primal-dual method did not converge; "
                         "duality gap " + std::to_string(diag.duality_gap),
                         diag.primal_residual, static_cast<std::size_t>(diag.iterations));

  // Assemble the certified curve and re-evaluate its action through the
  // slice-norm path.
  MinimizeResult result;
  result.diagnostics = diag;
  result.curve.times.resize(K + 1);
  for (int k = 0; k <= K; ++k) result.curve.times[k] = static_cast<double>(k) / K;
  result.curve.densities.push_back(rho0);
  for (int level = 1; level < K; ++level) {
    Vector r(n);
    for (int i = 0; i < n; ++i) r[i] = std::max(0.0, x[rho_ix(level, i)]);
    result.curve.densities.push_back(GridDensity::normalized(grid, r));
  }
  result.curve.densities.push_back(rho1);
  for (int k = 0; k < K; ++k) {
    Vector mv(ne);
    for (int e = 0; e < ne; ++e) mv[e] = x[m_ix(k, e)];
    result.curve.momenta.emplace_back(grid, std::move(mv));
  }
  const ActionValue certified = opts.kinetic_only
                                    ? kinetic_action(result.curve)
                                    : controlled_action(result.curve, op, tau);
  if (certified.is_infinite)
    throw NonConvergence("minimize_controlled_action: returned curve has infinite action",
                         diag.primal_residual, static_cast<std::size_t>(diag.iterations));
  result.value = certified.value;
  return result;
}

}  // namespace wgf
