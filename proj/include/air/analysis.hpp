#pragma once

#include "air/errors.hpp"
#include "air/geometry.hpp"
#include "air/types.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace air {

/// pi with pi P = pi and sum(pi) = 1 by a direct solve. Throws NumericalError
/// when the stationary law is not unique; warns when P is not primitive.
Vector stationary_law(const Matrix& P);

/// (1/2) sum_i |mu1_i - mu2_i|.
template <typename A, typename B>
double total_variation(const Eigen::MatrixBase<A>& mu1, const Eigen::MatrixBase<B>& mu2) {
  if (mu1.size() != mu2.size()) throw DomainError("total_variation: length mismatch");
  return 0.5 * (mu1 - mu2).cwiseAbs().sum();
}

/// Throws DomainError unless mu is a probability vector of length n.
void check_probability(const Vector& mu, Eigen::Index n, const char* what = "measure");

/// Exact inf over couplings of the integral of d, by the transportation
/// simplex. Trivial and V-weighted costs are cross-checked against their
/// closed forms (total variation; sum_y V^q(y) |mu1(y) - mu2(y)|).
double wasserstein_exact(const CostModel& model, const Vector& mu1, const Vector& mu2);
double wasserstein_exact(const DistanceLike& d, const Vector& mu1, const Vector& mu2,
                         std::span<const AugmentedState> support);

struct ContractionReport {
  long ell = 1;
  double tau_ell = 0.0;
  std::pair<std::size_t, std::size_t> argmax_pair{0, 0};
  double M = 1.0;   // one-step bound, >= 1
  long k0 = 1;      // contraction lag
  double tau = 0.0; // tau(P^{k0})
};

/// sup over distinct pairs of W(P^ell(y1, .), P^ell(y2, .)) / d(y1, y2).
/// The returned report takes (k0, tau) = (ell, tau_ell) and M = max(1, tau(P)).
ContractionReport contraction_coefficient(const Matrix& P, const CostModel& model, long ell);
ContractionReport contraction_coefficient(const Matrix& P, const DistanceLike& d, long ell,
                                          std::span<const AugmentedState> support);

/// Uniform witnesses over a family: k0 is the first ell <= ell_max with
/// max_gamma tau(P_gamma^ell) < 1, tau that maximum, M = max(1, max tau(P_gamma)).
/// Throws NumericalError when no such ell exists.
ContractionReport contraction_constants(std::span<const Matrix> members, const CostModel& model,
                                        long ell_max = 64);

/// Total-variation contraction coefficient max_{i,j} TV(P_i., P_j.).
double tv_contraction(const Matrix& P);

/// E(y) = sum_{y'} d(y, y') pi(y').
double eccentricity(const CostModel& model, const Vector& pi, std::size_t y);
double eccentricity(const DistanceLike& d, const Vector& pi, const AugmentedState& y,
                    std::span<const AugmentedState> support);
Vector eccentricities(const CostModel& model, const Vector& pi);

/// max_y W(P^ell(y, .), pi).
double distance_to_stationarity(const Matrix& P, const Vector& pi, const CostModel& model, long ell);

struct PoissonSolution {
  Vector u;
  Vector f;
  Vector pi;
  double pi_f = 0.0;
  double residual = 0.0;          // |(u - Pu) - (f - pi(f))|_inf
  bool series_checked = false;
  long series_terms = 0;          // L + 1 terms of the truncated series
  double series_tail_bound = 0.0;
  double series_agreement = 0.0;  // |u_series - u|_inf
};

/// Solves u - Pu = f - pi(f) with pi(u) = 0 via the fundamental matrix
/// (I - P + 1 pi^T), and cross-checks against the truncated series
/// sum_{ell <= L} (P^ell f - pi(f)) with L from the total-variation
/// contraction tail bound. Throws NumericalError if the two disagree.
PoissonSolution poisson_solve(const Matrix& P, const Vector& f);

/// Poisson solution without the series cross-check, for a known pi.
PoissonSolution poisson_solve_direct(const Matrix& P, const Vector& f, const Vector& pi);

/// Truncated series with a fixed number of terms (estimate mode).
Vector poisson_series(const Matrix& P, const Vector& f, const Vector& pi, long terms);

struct PoissonBoundAudit {
  bool ok = true;
  Vector bound;   // k0 L M^{k0} E(y) / (1 - tau)
  Vector slack;   // bound - |u|
  double min_slack = 0.0;
};

PoissonBoundAudit poisson_bound_check(const PoissonSolution& sol, const CostModel& model,
                                      double lipschitz, const ContractionReport& report);

struct DualityGap {
  double lower = 0.0;
  double exact = 0.0;
  bool inequality_holds = true;
  double gap() const { return exact - lower; }
};

/// lower = max over sampled Lip_1 probes (plus `extra_probes`) of
/// |mu1(psi) - mu2(psi)|; exact = wasserstein_exact.
DualityGap duality_gap(const CostModel& model, const Vector& mu1, const Vector& mu2,
                       std::size_t probe_count, std::uint64_t seed,
                       std::span<const Vector> extra_probes = {});

/// Every {0, 1}-valued function on n <= 20 states (the sharp probes of the
/// trivial metric).
std::vector<Vector> indicator_probes(std::size_t n);

struct LyapunovAudit {
  bool ok = true;
  std::vector<double> q;
  std::vector<double> worst_slack;  // min_y (kappa^q V^q + b^q - P V^q)
  double pi_V = 0.0;
  double pi_V_bound = 0.0;          // b / (1 - kappa)
};

/// Verifies PV <= kappa V + b (AuditFailure naming the worst state otherwise),
/// then PV^q <= kappa^q V^q + b^q for each q and pi(V) <= b/(1 - kappa).
LyapunovAudit lyapunov_audit(const Matrix& P, const LyapunovSpec& spec, std::span<const double> q_grid);

struct MinorisationAudit {
  bool ok = false;
  double mass = 0.0;  // sum of zeta over C = largest admissible delta
  Vector eta;         // zeta / mass on C, zero elsewhere
};

MinorisationAudit minorisation_audit(const Matrix& P, std::span<const std::size_t> small_set, double delta);

}  // namespace air
