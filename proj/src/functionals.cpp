#include "wgflow/functionals.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#include <cmath>
#include <limits>

namespace wgf {

namespace {

constexpr double kFeasTol = 1e-9;
constexpr double kBlowupSentinel = 1e12;

/// Logarithmic mean; continuous extension logmean(x, x) = x, logmean(0, y) = 0.
double logmean(double x, double y) {
  if (x <= 0.0 || y <= 0.0) return 0.0;
  if (x == y) return x;
  return (x - y) / (std::log(x) - std::log(y));
}

/// Connected components of the positive-weight edge graph.
std::vector<int> components_of(const GridPtr& grid, const Vector& theta, int* count) {
  std::vector<int> comp(grid->cells(), -1);
  std::vector<std::vector<int>> adj(grid->cells());
  const auto& edges = grid->edges();
  for (int e = 0; e < grid->edge_count(); ++e) {
    if (theta[e] > 0.0) {
      adj[edges[e].a].push_back(edges[e].b);
      adj[edges[e].b].push_back(edges[e].a);
    }
  }
  int c = 0;
  std::vector<int> stack;
  for (int i = 0; i < grid->cells(); ++i) {
    if (comp[i] >= 0) continue;
    stack.push_back(i);
    comp[i] = c;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : adj[u])
        if (comp[v] < 0) {
          comp[v] = c;
          stack.push_back(v);
        }
    }
    ++c;
  }
  *count = c;
  return comp;
}

}  // namespace

double free_energy(const GridDensity& rho, const Potential& pot) {
  require_same_grid(rho.grid(), pot.grid());
  const double vol = rho.grid()->cell_volume();
  double f = 0.0;
  for (int i = 0; i < rho.grid()->cells(); ++i) {
    const double m = rho.mass(i);
    if (m <= 0.0) continue;
    f += m * std::log(m / vol) + pot.psi()[i] * m;
  }
  return f;
}

ExtReal fisher_information_quadrature(const GridDensity& rho, const Potential& pot) {
  require_same_grid(rho.grid(), pot.grid());
  const GridPtr& grid = rho.grid();
  const double vol = grid->cell_volume();
  const auto& edges = grid->edges();
  double total = 0.0;
  for (int e = 0; e < grid->edge_count(); ++e) {
    const int a = edges[e].a, b = edges[e].b;
    const double fa = rho.density(a), fb = rho.density(b);
    const double ga = fa / pot.gibbs()[a], gb = fb / pot.gibbs()[b];
    const double h = grid->spacing(edges[e].axis);
    if (ga > 0.0 && gb > 0.0) {
      const double dg = (gb - ga) / h;
      total += vol * dg * dg * logmean(fa, fb) / (ga * gb);
    } else if (ga > 0.0 || gb > 0.0) {
      // Edge straddles the boundary of {g > 0}: excluded from the quadrature,
      // but a blown-up one-sided quotient forces the infinite value.
      const double fpos = std::max(fa, fb);
      if (vol * fpos / (h * h) > kBlowupSentinel) return ExtReal::infinite();
    }
  }
  return ExtReal::finite(total);
}

Hm1Operator::Hm1Operator(const GridDensity& rho, int direct_solver_threshold)
    : Hm1Operator(rho.grid(), edge_density_weights(rho), direct_solver_threshold) {}

Hm1Operator::Hm1Operator(GridPtr grid, Vector edge_weights, int direct_solver_threshold)
    : grid_(std::move(grid)), theta_(std::move(edge_weights)) {
  if (theta_.size() != grid_->edge_count())
    throw std::invalid_argument("Hm1Operator: weight size mismatch");
  if ((theta_.array() < 0.0).any())
    throw std::invalid_argument("Hm1Operator: negative edge weight");
  laplacian_ = weighted_laplacian_from_edge_weights(grid_, theta_);
  component_ = components_of(grid_, theta_, &n_components_);

  grounded_ = laplacian_;
  double dmax = 0.0;
  for (int i = 0; i < grid_->cells(); ++i) dmax = std::max(dmax, grounded_.coeff(i, i));
  const double pin = std::max(1.0, dmax);
  std::vector<bool> seen(n_components_, false);
  for (int i = 0; i < grid_->cells(); ++i) {
    if (!seen[component_[i]]) {
      seen[component_[i]] = true;
      grounded_.coeffRef(i, i) += pin;
    }
  }
  grounded_.makeCompressed();

  use_direct_ = grid_->cells() < direct_solver_threshold;
  if (use_direct_) {
    ldlt_ = std::make_unique<Eigen::SimplicialLDLT<SparseMatrix>>();
    ldlt_->compute(grounded_);
    if (ldlt_->info() != Eigen::Success)
      throw LinearSolveFailure("Hm1Operator: factorization failed");
  }
}

void Hm1Operator::check_feasible(const Vector& s) const {
  Vector comp_sum = Vector::Zero(n_components_);
  Vector comp_abs = Vector::Zero(n_components_);
  for (int i = 0; i < grid_->cells(); ++i) {
    comp_sum[component_[i]] += s[i];
    comp_abs[component_[i]] += std::abs(s[i]);
  }
  const double scale = std::max(1e-300, s.cwiseAbs().sum());
  for (int c = 0; c < n_components_; ++c) {
    if (std::abs(comp_sum[c]) > kFeasTol * std::max(scale, comp_abs[c]))
      throw InfeasibleSupport(
          "measure not balanced within a positive-density component; the H^-1 "
          "norm is infinite");
  }
}

Vector Hm1Operator::solve_checked(const Vector& s) const {
  Vector f;
  if (use_direct_) {
    f = ldlt_->solve(s);
  } else {
    Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(1e-12);
    cg.setMaxIterations(20 * grid_->cells());
    cg.compute(grounded_);
    f = cg.solve(s);
  }
  // Iterative refinement against the ungrounded operator.
  const double scale = std::max(1e-300, s.cwiseAbs().maxCoeff());
  for (int pass = 0; pass < 3; ++pass) {
    Vector r = s - laplacian_ * f;
    if (r.cwiseAbs().maxCoeff() <= 1e-11 * scale) return f;
    if (use_direct_)
      f += ldlt_->solve(r);
    else {
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
      cg.setTolerance(1e-12);
      cg.compute(grounded_);
      f += cg.solve(r).eval();
    }
  }
  Vector r = s - laplacian_ * f;
  if (r.cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InfeasibleSupport("singular weighted Laplacian beyond tolerance");
  return f;
}

Vector Hm1Operator::solve(const GridSignedMeasure& s) const {
  require_same_grid(grid_, s.grid());
  check_feasible(s.values());
  return solve_checked(s.values());
}

double Hm1Operator::norm_sq(const GridSignedMeasure& s) const {
  return s.values().dot(solve(s));
}

double Hm1Operator::inner(const GridSignedMeasure& s1, const GridSignedMeasure& s2) const {
  require_same_grid(grid_, s1.grid());
  require_same_grid(grid_, s2.grid());
  check_feasible(s1.values());
  check_feasible(s2.values());
  return s1.values().dot(solve_checked(s2.values()));
}

Hm1Solution Hm1Operator::full_solution(const GridSignedMeasure& s) const {
  Vector f = solve(s);
  const double norm_sq = s.values().dot(f);
  EdgeField grad_f = gradient(f, grid_);
  EdgeField flux(grid_, theta_.cwiseProduct(grad_f.values()));
  return Hm1Solution{norm_sq, std::move(f), std::move(flux)};
}

Hm1Solution hm1_norm(const GridSignedMeasure& s, const GridDensity& rho) {
  require_same_grid(s.grid(), rho.grid());
  return Hm1Operator(rho).full_solution(s);
}

double hm1_inner(const GridSignedMeasure& s1, const GridSignedMeasure& s2,
                 const GridDensity& rho) {
  return Hm1Operator(rho).inner(s1, s2);
}

namespace {

/// KKT solve for the flux form: minimize sum vol m^2 / theta over div(m) = -s.
/// Edges with zero weight are removed (their momentum is pinned to zero).
EdgeField flux_form_minimizer(const GridSignedMeasure& s, const GridDensity& rho,
                              int* kept_out) {
  const GridPtr& grid = s.grid();
  const double vol = grid->cell_volume();
  const auto& edges = grid->edges();
  const Vector theta = edge_density_weights(rho);

  std::vector<int> kept;
  for (int e = 0; e < grid->edge_count(); ++e)
    if (theta[e] > 0.0) kept.push_back(e);
  const int ne = static_cast<int>(kept.size());
  const int n = grid->cells();

  int n_comp = 0;
  const std::vector<int> comp = components_of(grid, theta, &n_comp);
  {
    Vector comp_sum = Vector::Zero(n_comp);
    for (int i = 0; i < n; ++i) comp_sum[comp[i]] += s.values()[i];
    const double scale = std::max(1e-300, s.values().cwiseAbs().sum());
    for (int c = 0; c < n_comp; ++c)
      if (std::abs(comp_sum[c]) > kFeasTol * scale)
        throw InfeasibleSupport("flux form: no feasible momentum field");
  }

  // KKT matrix [[Q, D^T], [D, P]] with Q the quadratic diagonal, D the
  // divergence restricted to kept edges and P a grounding pin per component.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(ne) * 5 + n);
  for (int k = 0; k < ne; ++k)
    trips.emplace_back(k, k, 2.0 * vol / theta[kept[k]]);
  for (int k = 0; k < ne; ++k) {
    const Edge& ed = edges[kept[k]];
    const double d = vol / grid->spacing(ed.axis);
    trips.emplace_back(ne + ed.a, k, d);
    trips.emplace_back(ne + ed.b, k, -d);
    trips.emplace_back(k, ne + ed.a, d);
    trips.emplace_back(k, ne + ed.b, -d);
  }
  std::vector<bool> seen(n_comp, false);
  for (int i = 0; i < n; ++i)
    if (!seen[comp[i]]) {
      seen[comp[i]] = true;
      trips.emplace_back(ne + i, ne + i, 1.0);
    }
  SparseMatrix kkt(ne + n, ne + n);
  kkt.setFromTriplets(trips.begin(), trips.end());

  Eigen::SparseLU<SparseMatrix> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success)
    throw LinearSolveFailure("flux form: KKT factorization failed");
  Vector rhs = Vector::Zero(ne + n);
  rhs.tail(n) = -s.values();
  Vector x = lu.solve(rhs);

  // Feasibility of the recovered momentum.
  Vector m = Vector::Zero(grid->edge_count());
  for (int k = 0; k < ne; ++k) m[kept[k]] = x[k];
  EdgeField field(grid, std::move(m));
  Vector resid = divergence(field).values() + s.values();
  const double scale = std::max(1e-300, s.values().cwiseAbs().maxCoeff());
  if (resid.cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InfeasibleSupport("flux form: continuity constraint not satisfiable");
  if (kept_out) *kept_out = ne;
  return field;
}

}  // namespace

EdgeField hm1_flux_minimizer(const GridSignedMeasure& s, const GridDensity& rho) {
  require_same_grid(s.grid(), rho.grid());
  return flux_form_minimizer(s, rho, nullptr);
}

double hm1_norm_flux_form(const GridSignedMeasure& s, const GridDensity& rho) {
  require_same_grid(s.grid(), rho.grid());
  const EdgeField m = flux_form_minimizer(s, rho, nullptr);
  const Vector theta = edge_density_weights(rho);
  const double vol = rho.grid()->cell_volume();
  double value = 0.0;
  for (int e = 0; e < rho.grid()->edge_count(); ++e) {
    const double me = m.values()[e];
    if (me != 0.0) value += vol * me * me / theta[e];
  }
  return value;
}

HwiReport hwi_check(const GridDensity& rho, const Potential& pot, double w2_to_nu) {
  HwiReport rep;
  rep.w2 = w2_to_nu;
  rep.relative_entropy = free_energy(rho, pot) + std::log(pot.gibbs_mass());
  const ExtReal g = fisher_information_quadrature(rho, pot);
  rep.fisher_infinite = g.is_infinite;
  if (g.is_infinite) {
    rep.rhs = std::numeric_limits<double>::max();
    rep.slack = rep.rhs - rep.relative_entropy;
    rep.fisher = 0.0;
    return rep;
  }
  rep.fisher = g.value;
  rep.rhs = w2_to_nu * std::sqrt(std::max(0.0, g.value)) -
            0.5 * pot.lambda() * w2_to_nu * w2_to_nu;
  rep.slack = rep.rhs - rep.relative_entropy;
  return rep;
}

}  // namespace wgf
