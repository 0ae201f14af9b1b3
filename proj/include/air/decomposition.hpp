#pragma once

#include "air/analysis.hpp"
#include "air/schedule.hpp"
#include "air/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace air {

/// A recorded finite-state AIR path: states Y_0..Y_n and, for each time i,
/// the id of the installed parameter Gamma_i.
struct FiniteTrajectory {
  std::vector<std::size_t> states;
  std::vector<std::size_t> param_ids;

  std::uint64_t horizon() const noexcept { return states.empty() ? 0 : states.size() - 1; }
};

/// Exact per-parameter data: P_gamma and its Poisson solution for h.
struct ParameterModel {
  Matrix P;
  PoissonSolution solution;
};

using ParameterModels = std::map<std::size_t, ParameterModel>;

struct DecompositionReport {
  std::uint64_t n = 0;
  std::uint64_t m = 0;           // adaptations in [1, n]
  double lhs = 0.0;              // sum_{j<=n} (h(Y_j) - pi_{Gamma_{j-1}}(h))
  double M_n = 0.0;
  std::vector<double> M_path;    // M_1..M_n (when kept)
  std::vector<double> deltas;    // Delta_1..Delta_n (when kept)
  double max_abs_delta = 0.0;
  double sum_sq_delta = 0.0;
  double R_m = 0.0;              // remainder over adaptation times
  double g_n = 0.0;              // boundary term
  double identity_residual = 0.0;
  double general_adaptation_sum = 0.0;  // sum_j (u_{Gamma_j} - u_{Gamma_{j-1}})(Y_j)
  std::uint64_t nonzero_within_window_terms = 0;
  bool estimate_mode = false;
  double truncation_bound = 0.0;  // estimate mode only

  double total() const { return M_n + R_m + g_n; }
  double general_total() const { return M_n + general_adaptation_sum + g_n; }
};

/// Martingale decomposition of sum (h(Y_j) - pi_{Gamma_{j-1}}(h)) into
/// M_n + R_m + g_n, computed from the AIR form and from the generic per-step
/// form. Throws DomainError if a parameter id has no model, or if the
/// installed parameter changes inside a window.
DecompositionReport decompose(const FiniteTrajectory& trajectory, const Vector& h,
                              const ParameterModels& models, const AirSchedule& schedule,
                              bool keep_paths = true);

struct BoundInputs {
  long k0 = 1;
  double L = 1.0;
  double M = 1.0;
  double tau = 0.0;
  double K = 1.0;

  /// k0 L M^{k0} K / (1 - tau): uniform bound on |u_gamma|.
  double poisson_sup() const;
};

struct MartingaleAudit {
  bool ok = true;
  double bound = 0.0;             // 2 k0 L M^{k0} K / (1 - tau)
  double max_abs_delta = 0.0;
  double max_abs_z = 0.0;         // per-step conditional-mean z-score across replications
  std::vector<double> z_scores;
};

/// max_j |Delta_j| against the increment bound for every report; with two or more
/// replications also the per-step z-scores of the mean increment.
MartingaleAudit martingale_audit(std::span<const DecompositionReport> reports, const BoundInputs& inputs,
                                 double z_limit = 4.0);

struct RemainderAudit {
  bool ok = true;
  double value = 0.0;
  double bound = 0.0;          // 2 (2n/c_beta)^{1/(1+beta)} sup|u|
  double literal_bound = 0.0;  // n^{1/(1+beta)} (2 c_beta)^{1/(1+beta)} sup|u|
  double slack = 0.0;
  double m_bound = 0.0;        // upper bound on m(n) from the envelope
};

RemainderAudit remainder_audit(const DecompositionReport& report, const BoundInputs& inputs,
                               std::uint64_t n, double beta);

/// Decomposition in estimate mode: u_gamma from a truncated series with
/// `terms` terms instead of an exact solve. The report carries the truncation
/// bound from the supplied (k0, tau) instead of an exact residual guarantee.
DecompositionReport decompose_estimate(const FiniteTrajectory& trajectory, const Vector& h,
                                       const std::map<std::size_t, Matrix>& kernels,
                                       const AirSchedule& schedule, long terms, long k0, double tau);

}  // namespace air
