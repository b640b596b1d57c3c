#pragma once

namespace wgf::defaults {

/// Implicit-Euler step cap for the Fokker-Planck semigroup.
inline constexpr double kDtMax = 1e-3;

/// Primal-dual solver for the controlled-action minimization.
inline constexpr int kPdhgMaxIterations = 20000;
inline constexpr double kPdhgGapTol = 1e-7;      // relative to the objective scale
inline constexpr double kPdhgFeasTol = 1e-9;     // relative constraint residual

/// Entropic JKO proximal solver: regularization annealed between these two
/// multiples of h^2.
inline constexpr double kJkoEpsStartFactor = 1e-1;
inline constexpr double kJkoEpsFloorFactor = 1e-3;

/// Dyadic epsilon grid for the generalized inverse of g: eps = 0.2 * 2^-k.
inline constexpr double kEpsGridTop = 0.2;
inline constexpr int kEpsGridLevels = 11;

/// Discretization budget tol_chain = C * (dt + h^2) for the lower-bound chain
/// and the entropy-dissipation identity. The constants were calibrated once
/// on the quadratic-potential testcase (256 cells, [-6,6], tau sweep down to
/// 0.025) and are frozen here.
inline constexpr double kChainC = 2.0;
inline constexpr double kDissipationC = 2.0;

}  // namespace wgf::defaults
