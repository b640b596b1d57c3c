#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "wgflow/functionals.hpp"
#include "wgflow/grid.hpp"
#include "wgflow/potentials.hpp"

namespace wgf::test {

// ---------------------------------------------------------------------------
// Closed-form Gaussian oracles for Psi(x) = x^2/2 (lambda = 1).
// ---------------------------------------------------------------------------

/// F(N(m, s2)) = -0.5 ln(2 pi e s2) + (s2 + m^2)/2.
inline double gaussian_free_energy(double mean, double var) {
  return -0.5 * std::log(2.0 * M_PI * M_E * var) + 0.5 * (var + mean * mean);
}

/// Relative Fisher information of N(m, s2) against nu = e^{-x^2/2} dx:
/// E |x (1 - 1/s2) + m/s2|^2 under N(m, s2).
inline double gaussian_fisher(double mean, double var) {
  const double a = 1.0 - 1.0 / var;
  return a * a * (var + mean * mean) + 2.0 * a * mean * mean / var +
         mean * mean / (var * var);
}

/// W2^2 between 1D Gaussians.
inline double gaussian_w2_sq(double m0, double v0, double m1, double v1) {
  const double dm = m0 - m1;
  const double ds = std::sqrt(v0) - std::sqrt(v1);
  return dm * dm + ds * ds;
}

// ---------------------------------------------------------------------------
// Independent oracles for the weighted H^-1 norm.
// ---------------------------------------------------------------------------

/// Dense pseudoinverse route: s^T L^+ s via complete orthogonal decomposition.
inline double hm1_norm_pinv_oracle(const GridSignedMeasure& s, const GridDensity& rho) {
  const Eigen::MatrixXd L = Eigen::MatrixXd(weighted_laplacian(rho));
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(L);
  const Eigen::VectorXd f = cod.pseudoInverse() * s.values();
  return s.values().dot(f);
}

/// Brute-force equality-constrained quadratic program for the flux form:
/// minimize sum vol m^2/theta over div(m) = -s, solved densely through a
/// particular solution plus the divergence nullspace.
inline double hm1_flux_qp_oracle(const GridSignedMeasure& s, const GridDensity& rho) {
  const GridPtr& grid = s.grid();
  const int n = grid->cells();
  const int ne = grid->edge_count();
  const double vol = grid->cell_volume();
  const Vector theta = edge_density_weights(rho);

  // Divergence as a dense matrix D (n x ne).
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, ne);
  const auto& edges = grid->edges();
  for (int e = 0; e < ne; ++e) {
    const double d = vol / grid->spacing(edges[e].axis);
    D(edges[e].a, e) += d;
    D(edges[e].b, e) -= d;
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(D);
  const Eigen::VectorXd m0 = cod.solve(-s.values());
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
  const Eigen::MatrixXd N = lu.kernel();  // ne x k

  // Quadratic form Q = diag(2 vol / theta); minimize over m = m0 + N z.
  Eigen::VectorXd q(ne);
  for (int e = 0; e < ne; ++e) {
    if (theta[e] <= 0.0) {
      // Zero-weight edges admit no flux; the oracle only handles instances
      // where the particular solution avoids them.
      q[e] = 1e30;
    } else {
      q[e] = vol / theta[e];
    }
  }
  const Eigen::MatrixXd Qn = q.asDiagonal() * N;
  const Eigen::MatrixXd H = N.transpose() * Qn;
  const Eigen::VectorXd g = N.transpose() * (q.asDiagonal() * m0);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(N.cols());
  if (N.cols() > 0) z = -H.ldlt().solve(g);
  const Eigen::VectorXd m = m0 + N * z;
  double value = 0.0;
  for (int e = 0; e < ne; ++e) value += q[e] * m[e] * m[e];
  return value;
}

/// Direct summation of sum masses log(density) + psi masses.
inline double free_energy_summation_oracle(const GridDensity& rho, const Potential& pot) {
  double acc = 0.0;
  for (int i = 0; i < rho.grid()->cells(); ++i) {
    if (rho.mass(i) <= 0.0) continue;
    acc += rho.mass(i) * std::log(rho.density(i)) + pot.psi()[i] * rho.mass(i);
  }
  return acc;
}

/// Random strictly positive density.
inline GridDensity random_density(const GridPtr& grid, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  Vector w(grid->cells());
  for (int i = 0; i < grid->cells(); ++i) w[i] = unif(rng);
  return GridDensity::normalized(grid, w);
}

/// Random zero-sum measure.
inline GridSignedMeasure random_zero_sum(const GridPtr& grid, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector s(grid->cells());
  for (int i = 0; i < grid->cells(); ++i) s[i] = gauss(rng);
  s.array() -= s.mean();
  return GridSignedMeasure(grid, s);
}

}  // namespace wgf::test
