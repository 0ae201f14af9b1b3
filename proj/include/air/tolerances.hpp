#pragma once

// Every numerical tolerance used by the library lives here.

namespace air::tol {

inline constexpr double row_sum = 1e-12;          // stochastic-matrix rows
inline constexpr double probability_sum = 1e-10;  // probability vectors
inline constexpr double invariance = 1e-10;       // |pi P - pi|_inf
inline constexpr double linear_solve = 1e-10;     // residual of direct solves
inline constexpr double cross_method = 1e-8;      // agreement of two routes
inline constexpr double series_tail = 1e-12;      // truncated Poisson series
inline constexpr double identity_relative = 1e-8; // decomposition identity
inline constexpr double power_snap = 1e-15;       // ceil(j^beta) snapping, relative
inline constexpr double inequality = 1e-10;       // slack allowed in audits
inline constexpr double lipschitz = 1e-12;        // Lip_1 verification

}  // namespace air::tol
