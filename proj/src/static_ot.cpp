#include "wgflow/static_ot.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace wgf {

namespace {

constexpr int kExactCellLimit = 4096;

std::vector<int> support_of(const Vector& masses) {
  std::vector<int> idx;
  for (int i = 0; i < masses.size(); ++i)
    if (masses[i] > 0.0) idx.push_back(i);
  return idx;
}

}  // namespace

Coupling::Coupling(GridPtr grid, std::vector<CouplingEntry> entries, const Vector& rho0,
                   const Vector& rho1)
    : grid_(std::move(grid)), entries_(std::move(entries)) {
  Vector row = Vector::Zero(rho0.size());
  Vector col = Vector::Zero(rho1.size());
  for (const auto& e : entries_) {
    if (e.mass < 0.0) throw std::invalid_argument("Coupling: negative entry");
    row[e.i] += e.mass;
    col[e.j] += e.mass;
  }
  residual0_ = (row - rho0).cwiseAbs().maxCoeff();
  residual1_ = (col - rho1).cwiseAbs().maxCoeff();
  if (residual0_ > 1e-8 || residual1_ > 1e-8)
    throw std::invalid_argument("Coupling: marginals violated beyond 1e-8");
}

double Coupling::squared_cost() const {
  double c = 0.0;
  for (const auto& e : entries_) c += e.mass * grid_->sq_dist(e.i, e.j);
  return c;
}

namespace {

// ---------------------------------------------------------------------------
// 1D: monotone (quantile) coupling.
// ---------------------------------------------------------------------------

struct QuantilePlan {
  std::vector<CouplingEntry> entries;
  double cost = 0.0;
};

QuantilePlan quantile_plan(const Grid& grid, const Vector& a, const Vector& b) {
  QuantilePlan plan;
  const std::vector<int> si = support_of(a), sj = support_of(b);
  std::size_t p = 0, q = 0;
  double ra = si.empty() ? 0.0 : a[si[0]];
  double rb = sj.empty() ? 0.0 : b[sj[0]];
  while (p < si.size() && q < sj.size()) {
    const double m = std::min(ra, rb);
    if (m > 0.0) {
      plan.entries.push_back({si[p], sj[q], m});
      plan.cost += m * grid.sq_dist(si[p], sj[q]);
    }
    ra -= m;
    rb -= m;
    if (ra <= rb && p + 1 <= si.size()) {
      ++p;
      if (p < si.size()) ra = a[si[p]];
    } else {
      ++q;
      if (q < sj.size()) rb = b[sj[q]];
    }
  }
  return plan;
}

/// Kantorovich potentials for a monotone plan: complementary slackness along
/// the staircase of basic entries, then completion on off-support cells.
void quantile_duals(const Grid& grid, const std::vector<CouplingEntry>& entries,
                    Vector* u, Vector* v) {
  const int n = grid.cells();
  constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
  *u = Vector::Constant(n, kUnset);
  *v = Vector::Constant(n, kUnset);
  if (entries.empty()) {
    u->setZero();
    v->setZero();
    return;
  }
  (*u)[entries.front().i] = 0.0;
  for (const auto& e : entries) {
    const double c = grid.sq_dist(e.i, e.j);
    if (!std::isnan((*u)[e.i]))
      (*v)[e.j] = c - (*u)[e.i];
    else
      (*u)[e.i] = c - (*v)[e.j];
  }
  // Off-support completion keeps dual feasibility: tightest admissible value.
  for (int i = 0; i < n; ++i) {
    if (!std::isnan((*u)[i])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j)
      if (!std::isnan((*v)[j])) best = std::min(best, grid.sq_dist(i, j) - (*v)[j]);
    (*u)[i] = best;
  }
  for (int j = 0; j < n; ++j) {
    if (!std::isnan((*v)[j])) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) best = std::min(best, grid.sq_dist(i, j) - (*u)[i]);
    (*v)[j] = best;
  }
}

// ---------------------------------------------------------------------------
// 2D: transportation simplex (MODI) with a spanning-tree basis.
// ---------------------------------------------------------------------------

struct SimplexResult {
  std::vector<CouplingEntry> entries;
  double cost = 0.0;
  Vector u, v;  // potentials on support nodes
};

class TransportSimplex {
 public:
  TransportSimplex(const Grid& grid, std::vector<int> src, std::vector<int> dst,
                   const Vector& masses0, const Vector& masses1)
      : grid_(grid), src_(std::move(src)), dst_(std::move(dst)) {
    n_ = static_cast<int>(src_.size());
    m_ = static_cast<int>(dst_.size());
    a_.resize(n_);
    b_.resize(m_);
    for (int i = 0; i < n_; ++i) a_[i] = masses0[src_[i]];
    for (int j = 0; j < m_; ++j) b_[j] = masses1[dst_[j]];
    double diam_sq = 0.0;
    for (int ax = 0; ax < grid.dim(); ++ax) {
      const double w = grid.hi(ax) - grid.lo(ax);
      diam_sq += w * w;
    }
    cost_scale_ = std::max(1.0, diam_sq);
  }

  SimplexResult solve() {
    northwest_init();
    const long max_pivots = 200L * (n_ + m_) + 10000L;
    for (long pivot = 0; pivot < max_pivots; ++pivot) {
      compute_potentials();
      int ei, ej;
      if (!find_entering(&ei, &ej)) return finish();
      do_pivot(ei, ej);
    }
    compute_potentials();
    int ei, ej;
    if (!find_entering(&ei, &ej)) return finish();
    throw NonConvergence("transportation simplex exceeded pivot budget",
                         min_reduced_, static_cast<std::size_t>(max_pivots));
  }

 private:
  double cost(int i, int j) const { return grid_.sq_dist(src_[i], dst_[j]); }

  struct Arc {
    int i, j;
    double flow;
  };

  void northwest_init() {
    arcs_.clear();
    std::vector<double> ra = a_, rb = b_;
    int i = 0, j = 0;
    while (i < n_ && j < m_) {
      const double f = std::min(ra[i], rb[j]);
      arcs_.push_back({i, j, f});
      ra[i] -= f;
      rb[j] -= f;
      if (i == n_ - 1 && j == m_ - 1) break;
      if (ra[i] <= rb[j] && i + 1 < n_)
        ++i;
      else
        ++j;
    }
    rebuild_adjacency();
  }

  void rebuild_adjacency() {
    adj_src_.assign(n_, {});
    adj_dst_.assign(m_, {});
    for (int k = 0; k < static_cast<int>(arcs_.size()); ++k) {
      adj_src_[arcs_[k].i].push_back(k);
      adj_dst_[arcs_[k].j].push_back(k);
    }
  }

  // Potentials via BFS over the basis tree. Nodes: sources 0..n-1, targets
  // n..n+m-1.
  void compute_potentials() {
    u_.assign(n_, 0.0);
    v_.assign(m_, 0.0);
    std::vector<char> seen_s(n_, 0), seen_t(m_, 0);
    parent_arc_.assign(n_ + m_, -1);
    parent_node_.assign(n_ + m_, -1);
    std::deque<int> queue;
    queue.push_back(0);
    seen_s[0] = 1;
    u_[0] = 0.0;
    while (!queue.empty()) {
      const int node = queue.front();
      queue.pop_front();
      if (node < n_) {
        for (int k : adj_src_[node]) {
          const int t = arcs_[k].j;
          if (!seen_t[t]) {
            seen_t[t] = 1;
            v_[t] = cost(node, t) - u_[node];
            parent_arc_[n_ + t] = k;
            parent_node_[n_ + t] = node;
            queue.push_back(n_ + t);
          }
        }
      } else {
        const int t = node - n_;
        for (int k : adj_dst_[t]) {
          const int s = arcs_[k].i;
          if (!seen_s[s]) {
            seen_s[s] = 1;
            u_[s] = cost(s, t) - v_[t];
            parent_arc_[s] = k;
            parent_node_[s] = node;
            queue.push_back(s);
          }
        }
      }
    }
  }

  bool find_entering(int* ei, int* ej) {
    min_reduced_ = 0.0;
    *ei = -1;
    *ej = -1;
    const double tol = -1e-12 * cost_scale_;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < m_; ++j) {
        const double r = cost(i, j) - u_[i] - v_[j];
        if (r < min_reduced_) {
          min_reduced_ = r;
          *ei = i;
          *ej = j;
        }
      }
    return min_reduced_ < tol && *ei >= 0;
  }

  void do_pivot(int ei, int ej) {
    // Lowest common ancestor of source ei and target ej in the basis tree.
    std::vector<char> mark(n_ + m_, 0);
    for (int node = ei;;) {
      mark[node] = 1;
      if (parent_node_[node] < 0) break;
      node = parent_node_[node];
    }
    int lca = -1;
    for (int node = n_ + ej;;) {
      if (mark[node]) {
        lca = node;
        break;
      }
      if (parent_node_[node] < 0) break;
      node = parent_node_[node];
    }
    if (lca < 0) throw NonConvergence("transportation simplex: basis tree disconnected", 0, 0);
    // Cycle arcs in walk order: target ej up to the lca, then down to ei.
    std::vector<int> cycle_arcs;
    for (int node = n_ + ej; node != lca; node = parent_node_[node])
      cycle_arcs.push_back(parent_arc_[node]);
    std::vector<int> up_arcs;
    for (int node = ei; node != lca; node = parent_node_[node])
      up_arcs.push_back(parent_arc_[node]);
    cycle_arcs.insert(cycle_arcs.end(), up_arcs.rbegin(), up_arcs.rend());
    // Orientation: walking the cycle starting at target ej, arcs alternately
    // lose and gain the entering flow. An arc loses flow iff its target
    // endpoint is the node we reached before traversing it.
    double delta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    std::vector<int> sign(cycle_arcs.size());
    int reached = n_ + ej;
    for (std::size_t k = 0; k < cycle_arcs.size(); ++k) {
      const Arc& arc = arcs_[cycle_arcs[k]];
      const bool loses = (n_ + arc.j) == reached;
      sign[k] = loses ? -1 : +1;
      if (loses && arc.flow < delta) {
        delta = arc.flow;
        leaving = cycle_arcs[k];
      }
      reached = (reached == n_ + arc.j) ? arc.i : n_ + arc.j;
    }
    if (leaving < 0) throw NonConvergence("transportation simplex: no leaving arc", 0, 0);
    for (std::size_t k = 0; k < cycle_arcs.size(); ++k)
      arcs_[cycle_arcs[k]].flow += sign[k] * delta;
    arcs_[leaving] = {ei, ej, delta};
    rebuild_adjacency();
  }

  SimplexResult finish() {
    SimplexResult res;
    res.u = Vector::Zero(n_);
    res.v = Vector::Zero(m_);
    for (int i = 0; i < n_; ++i) res.u[i] = u_[i];
    for (int j = 0; j < m_; ++j) res.v[j] = v_[j];
    for (const Arc& arc : arcs_) {
      if (arc.flow > 0.0) {
        res.entries.push_back({src_[arc.i], dst_[arc.j], arc.flow});
        res.cost += arc.flow * cost(arc.i, arc.j);
      }
    }
    return res;
  }

  const Grid& grid_;
  std::vector<int> src_, dst_;
  int n_ = 0, m_ = 0;
  std::vector<double> a_, b_;
  std::vector<Arc> arcs_;
  std::vector<std::vector<int>> adj_src_, adj_dst_;
  std::vector<double> u_, v_;
  std::vector<int> parent_arc_, parent_node_;
  double cost_scale_ = 1.0;
  double min_reduced_ = 0.0;
};

}  // namespace

W2Result w2_exact(const GridDensity& rho0, const GridDensity& rho1) {
  require_same_grid(rho0.grid(), rho1.grid());
  const GridPtr& grid = rho0.grid();

  if (grid->dim() == 1) {
    QuantilePlan plan = quantile_plan(*grid, rho0.masses(), rho1.masses());
    Vector u, v;
    quantile_duals(*grid, plan.entries, &u, &v);
    return W2Result{std::sqrt(std::max(0.0, plan.cost)),
                    Coupling(grid, std::move(plan.entries), rho0.masses(), rho1.masses()),
                    std::move(u), std::move(v)};
  }

  if (grid->cells() > kExactCellLimit)
    throw SizeLimit("w2_exact: 2D instance above 4096 cells; use w2_entropic");

  std::vector<int> src = support_of(rho0.masses());
  std::vector<int> dst = support_of(rho1.masses());
  TransportSimplex simplex(*grid, src, dst, rho0.masses(), rho1.masses());
  SimplexResult res = simplex.solve();

  Vector u = Vector::Zero(grid->cells());
  Vector v = Vector::Zero(grid->cells());
  for (std::size_t i = 0; i < src.size(); ++i) u[src[i]] = res.u[i];
  for (std::size_t j = 0; j < dst.size(); ++j) v[dst[j]] = res.v[j];
  return W2Result{std::sqrt(std::max(0.0, res.cost)),
                  Coupling(grid, std::move(res.entries), rho0.masses(), rho1.masses()),
                  std::move(u), std::move(v)};
}

// ---------------------------------------------------------------------------
// Entropic solver.
// ---------------------------------------------------------------------------

namespace {

struct SinkhornState {
  Vector phi, psi;  // potentials on support atoms, cost units
  double residual = 0.0;
  int iterations = 0;
  double primal_cost = 0.0;
};

/// Log-domain Sinkhorn between mass vectors on support index sets, with
/// epsilon scaling from opts.eps_scaling_start down to eps.
SinkhornState sinkhorn_log(const Grid& grid, const std::vector<int>& si,
                           const std::vector<int>& sj, const Vector& masses0,
                           const Vector& masses1, double eps, const SinkhornOptions& opts) {
  const int n = static_cast<int>(si.size());
  const int m = static_cast<int>(sj.size());
  Eigen::MatrixXd c(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) c(i, j) = grid.sq_dist(si[i], sj[j]);

  Vector loga(n), logb(m);
  for (int i = 0; i < n; ++i) loga[i] = std::log(masses0[si[i]]);
  for (int j = 0; j < m; ++j) logb[j] = std::log(masses1[sj[j]]);

  SinkhornState st;
  st.phi = Vector::Zero(n);
  st.psi = Vector::Zero(m);

  std::vector<double> levels;
  double lvl = std::max(eps, opts.eps_scaling_start * c.maxCoeff());
  while (lvl > eps * 1.0000001) {
    levels.push_back(lvl);
    lvl *= opts.eps_scaling_ratio;
  }
  levels.push_back(eps);

  Eigen::ArrayXd row_buf(m), col_buf(n);

  // One alternating sweep of the potentials at regularization e, followed by
  // the row-marginal L1 residual (the psi half pins the columns).
  auto sweep = [&](double e, Vector* phi, Vector* psi) {
    for (int i = 0; i < n; ++i) {
      row_buf = (psi->array() - c.row(i).transpose().array()) / e + logb.array();
      const double mx = row_buf.maxCoeff();
      (*phi)[i] = -e * (mx + std::log((row_buf - mx).exp().sum()));
    }
    for (int j = 0; j < m; ++j) {
      col_buf = (phi->array() - c.col(j).array()) / e + loga.array();
      const double mx = col_buf.maxCoeff();
      (*psi)[j] = -e * (mx + std::log((col_buf - mx).exp().sum()));
    }
  };
  auto row_residual = [&](double e, const Vector& phi, const Vector& psi) {
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
      row_buf = (phi[i] + psi.array() - c.row(i).transpose().array()) / e + loga[i] +
                logb.array();
      res += std::abs(row_buf.exp().sum() - masses0[si[i]]);
    }
    return res;
  };

  // Safeguarded Anderson acceleration on the stacked potentials. The plain
  // iteration converges but stalls when the kernel width crosses the grid
  // spacing; the extrapolation is accepted only if it does not increase the
  // residual beyond the latest plain step.
  constexpr int kAndersonDepth = 5;
  int total_iter = 0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double e = levels[li];
    const bool final_level = (li + 1 == levels.size());
    const double tol = final_level ? opts.marginal_tol : 1e-4;

    std::vector<Vector> dx_hist, dr_hist;
    Vector x(n + m);
    x << st.phi, st.psi;
    Vector r_prev, x_prev;
    double res = std::numeric_limits<double>::infinity();
    for (int it = 0; it < opts.max_iterations; ++it) {
      Vector phi = x.head(n), psi = x.tail(m);
      sweep(e, &phi, &psi);
      Vector gx(n + m);
      gx << phi, psi;
      Vector r = gx - x;

      const bool extrapolate = !dx_hist.empty();
      Vector candidate = gx;
      if (extrapolate) {
        const int depth = static_cast<int>(dx_hist.size());
        Eigen::MatrixXd R(n + m, depth);
        for (int k = 0; k < depth; ++k) R.col(k) = dr_hist[k];
        const Eigen::VectorXd gamma = R.colPivHouseholderQr().solve(r);
        Vector correction = Vector::Zero(n + m);
        for (int k = 0; k < depth; ++k)
          correction += gamma[k] * (dx_hist[k] + dr_hist[k]);
        candidate = gx - correction;
      }
      const double plain_res = row_residual(e, gx.head(n), gx.tail(m));
      const double cand_res =
          extrapolate ? row_residual(e, candidate.head(n), candidate.tail(m)) : plain_res;
      ++total_iter;

      if (x_prev.size()) {
        dx_hist.push_back(x - x_prev);
        dr_hist.push_back(r - r_prev);
        if (static_cast<int>(dx_hist.size()) > kAndersonDepth) {
          dx_hist.erase(dx_hist.begin());
          dr_hist.erase(dr_hist.begin());
        }
      }
      x_prev = x;
      r_prev = r;

      if (extrapolate && cand_res < plain_res) {
        x = candidate;
        res = cand_res;
      } else {
        x = gx;
        res = plain_res;
        if (extrapolate) {
          // Rejected extrapolation: restart the memory.
          dx_hist.clear();
          dr_hist.clear();
          x_prev.resize(0);
        }
      }
      if (res <= tol) break;
    }
    st.phi = x.head(n);
    st.psi = x.tail(m);
    // A closing plain sweep leaves the column marginals exact.
    sweep(e, &st.phi, &st.psi);
    st.residual = row_residual(e, st.phi, st.psi);
    if (final_level && st.residual > opts.marginal_tol)
      throw NonConvergence("sinkhorn: marginal residual above tolerance", st.residual,
                           static_cast<std::size_t>(total_iter));
  }
  st.iterations = total_iter;

  st.primal_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    row_buf = (st.phi[i] + st.psi.array() - c.row(i).transpose().array()) / eps + loga[i] +
              logb.array();
    st.primal_cost += (row_buf.exp() * c.row(i).transpose().array()).sum();
  }
  return st;
}

}  // namespace

EntropicResult w2_entropic(const GridDensity& rho0, const GridDensity& rho1, double eps,
                           const SinkhornOptions& opts) {
  require_same_grid(rho0.grid(), rho1.grid());
  if (!(eps > 0.0)) throw std::invalid_argument("w2_entropic: eps must be positive");
  const GridPtr& grid = rho0.grid();
  const std::vector<int> si = support_of(rho0.masses());
  const std::vector<int> sj = support_of(rho1.masses());

  SinkhornState st = sinkhorn_log(*grid, si, sj, rho0.masses(), rho1.masses(), eps, opts);

  double estimate_sq = st.primal_cost;
  if (opts.debiased) {
    SinkhornState saa = sinkhorn_log(*grid, si, si, rho0.masses(), rho0.masses(), eps, opts);
    SinkhornState sbb = sinkhorn_log(*grid, sj, sj, rho1.masses(), rho1.masses(), eps, opts);
    estimate_sq -= 0.5 * (saa.primal_cost + sbb.primal_cost);
  }
  estimate_sq = std::max(0.0, estimate_sq);

  std::vector<CouplingEntry> entries;
  entries.reserve(si.size() * sj.size());
  for (std::size_t i = 0; i < si.size(); ++i)
    for (std::size_t j = 0; j < sj.size(); ++j) {
      const double g = std::exp((st.phi[i] + st.psi[j] - grid->sq_dist(si[i], sj[j])) / eps +
                                std::log(rho0.masses()[si[i]]) +
                                std::log(rho1.masses()[sj[j]]));
      if (g > 0.0) entries.push_back({si[i], sj[j], g});
    }

  EntropicResult out{std::sqrt(estimate_sq),
                     Coupling(grid, std::move(entries), rho0.masses(), rho1.masses()),
                     st.iterations, st.residual, eps};
  return out;
}

// ---------------------------------------------------------------------------
// Displacement interpolation.
// ---------------------------------------------------------------------------

namespace {

GridDensity splat_at_time(const GridPtr& grid, const Coupling& coupling, double t) {
  Vector masses = Vector::Zero(grid->cells());
  const int nx = grid->extent(0);
  auto axis_weights = [&](double pos, int axis, int* i0, double* w1) {
    const double q = (pos - grid->lo(axis)) / grid->spacing(axis) - 0.5;
    double fl = std::floor(q);
    *i0 = static_cast<int>(fl);
    *w1 = q - fl;
    const int nmax = grid->extent(axis) - 1;
    if (*i0 < 0) {
      *i0 = 0;
      *w1 = 0.0;
    } else if (*i0 >= nmax) {
      *i0 = nmax;
      *w1 = 0.0;
    }
  };
  for (const auto& e : coupling.entries()) {
    double px = (1.0 - t) * grid->center(e.i, 0) + t * grid->center(e.j, 0);
    int ix;
    double wx;
    axis_weights(px, 0, &ix, &wx);
    if (grid->dim() == 1) {
      masses[ix] += e.mass * (1.0 - wx);
      if (wx > 0.0) masses[ix + 1] += e.mass * wx;
    } else {
      double py = (1.0 - t) * grid->center(e.i, 1) + t * grid->center(e.j, 1);
      int iy;
      double wy;
      axis_weights(py, 1, &iy, &wy);
      masses[ix + nx * iy] += e.mass * (1.0 - wx) * (1.0 - wy);
      if (wx > 0.0) masses[ix + 1 + nx * iy] += e.mass * wx * (1.0 - wy);
      if (wy > 0.0) masses[ix + nx * (iy + 1)] += e.mass * (1.0 - wx) * wy;
      if (wx > 0.0 && wy > 0.0) masses[ix + 1 + nx * (iy + 1)] += e.mass * wx * wy;
    }
  }
  return GridDensity::normalized(grid, masses);
}

}  // namespace

GeodesicCurve displacement_interpolation(const GridDensity& rho0, const GridDensity& rho1,
                                         const std::vector<double>& times) {
  require_same_grid(rho0.grid(), rho1.grid());
  if (times.empty() || !std::is_sorted(times.begin(), times.end()) ||
      times.front() < 0.0 || times.back() > 1.0)
    throw std::invalid_argument("displacement_interpolation: times must be sorted in [0,1]");

  W2Result w2 = w2_exact(rho0, rho1);
  GeodesicCurve curve;
  curve.times = times;
  curve.w2 = w2.distance;
  curve.densities.reserve(times.size());
  for (double t : times) {
    if (t == 0.0)
      curve.densities.push_back(rho0);
    else if (t == 1.0)
      curve.densities.push_back(rho1);
    else
      curve.densities.push_back(splat_at_time(rho0.grid(), w2.coupling, t));
  }
  return curve;
}

GeodesicCurve uniform_geodesic(const GridDensity& rho0, const GridDensity& rho1, int k) {
  if (k < 1) throw std::invalid_argument("uniform_geodesic: need k >= 1");
  std::vector<double> times(k + 1);
  for (int i = 0; i <= k; ++i) times[i] = static_cast<double>(i) / k;
  times.front() = 0.0;
  times.back() = 1.0;
  return displacement_interpolation(rho0, rho1, times);
}

}  // namespace wgf
