#include "air/analysis.hpp"

#include "air/errors.hpp"
#include "air/kernels.hpp"
#include "air/log.hpp"
#include "air/tolerances.hpp"
#include "air/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace air {

Vector stationary_law(const Matrix& P) {
  check_stochastic(P);
  const Eigen::Index n = P.rows();
  const Matrix generator = Matrix::Identity(n, n) - P;
  Eigen::FullPivLU<Matrix> lu(generator);
  lu.setThreshold(1e-12);
  if (lu.rank() < n - 1) {
    throw NumericalError("stationary law is not unique: rank(I - P) = " + std::to_string(lu.rank()) +
                         " < " + std::to_string(n - 1));
  }
  if (!is_primitive(P)) warn("stationary_law: P is not primitive (reducible or periodic)");
  Matrix A = generator.transpose();
  A.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  Eigen::PartialPivLU<Matrix> solver(A);
  Vector pi = solver.solve(rhs);
  pi += solver.solve(rhs - A * pi);
  if ((pi.array() < -tol::invariance).any()) throw NumericalError("stationary law has negative mass");
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  const double residual = (pi.transpose() * P - pi.transpose()).cwiseAbs().maxCoeff();
  if (residual > tol::invariance) {
    throw NumericalError("stationary law residual " + std::to_string(residual) + " exceeds tolerance");
  }
  return pi;
}

void check_probability(const Vector& mu, Eigen::Index n, const char* what) {
  if (mu.size() != n) throw DomainError(std::string(what) + " has the wrong length");
  if (!(mu.array() >= 0.0).all() || !mu.allFinite()) {
    throw DomainError(std::string(what) + " has a negative or non-finite entry");
  }
  if (std::abs(mu.sum() - 1.0) > tol::probability_sum) {
    throw DomainError(std::string(what) + " does not sum to 1");
  }
}

double wasserstein_exact(const CostModel& model, const Vector& mu1, const Vector& mu2) {
  const auto n = static_cast<Eigen::Index>(model.size());
  check_probability(mu1, n, "mu1");
  check_probability(mu2, n, "mu2");
  const double value = solve_transport(mu1, mu2, model.cost).cost;
  double closed = std::numeric_limits<double>::quiet_NaN();
  if (model.kind == DistanceKind::trivial) closed = total_variation(mu1, mu2);
  if (model.kind == DistanceKind::v_weighted) closed = model.weight.dot((mu1 - mu2).cwiseAbs());
  if (!std::isnan(closed) && std::abs(closed - value) > tol::cross_method * std::max(1.0, closed)) {
    throw NumericalError("transport value disagrees with closed form");
  }
  return value;
}

double wasserstein_exact(const DistanceLike& d, const Vector& mu1, const Vector& mu2,
                         std::span<const AugmentedState> support) {
  return wasserstein_exact(make_cost_model(d, support), mu1, mu2);
}

double tv_contraction(const Matrix& P) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < P.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) best = std::max(best, total_variation(P.row(i), P.row(j)));
  return best;
}

namespace {

ContractionReport coefficient_of_power(const Matrix& Pl, const CostModel& model, long ell) {
  ContractionReport report;
  report.ell = ell;
  const Eigen::Index n = Pl.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double ratio =
          wasserstein_exact(model, Pl.row(i).transpose(), Pl.row(j).transpose()) / model.cost(i, j);
      if (ratio > report.tau_ell) {
        report.tau_ell = ratio;
        report.argmax_pair = {static_cast<std::size_t>(i), static_cast<std::size_t>(j)};
      }
    }
  }
  return report;
}

}  // namespace

ContractionReport contraction_coefficient(const Matrix& P, const CostModel& model, long ell) {
  if (ell < 1) throw DomainError("contraction_coefficient requires ell >= 1");
  check_stochastic(P);
  if (static_cast<std::size_t>(P.rows()) != model.size()) throw DomainError("kernel/cost size mismatch");
  ContractionReport report = coefficient_of_power(kernel_power(P, ell), model, ell);
  const double one_step = ell == 1 ? report.tau_ell : coefficient_of_power(P, model, 1).tau_ell;
  report.M = std::max(1.0, one_step);
  report.k0 = ell;
  report.tau = report.tau_ell;
  return report;
}

ContractionReport contraction_coefficient(const Matrix& P, const DistanceLike& d, long ell,
                                          std::span<const AugmentedState> support) {
  return contraction_coefficient(P, make_cost_model(d, support), ell);
}

ContractionReport contraction_constants(std::span<const Matrix> members, const CostModel& model,
                                        long ell_max) {
  if (members.empty()) throw DomainError("contraction_constants needs at least one kernel");
  double M = 1.0;
  for (const Matrix& P : members) M = std::max(M, coefficient_of_power(P, model, 1).tau_ell);
  for (long ell = 1; ell <= ell_max; ++ell) {
    ContractionReport worst;
    worst.ell = ell;
    for (const Matrix& P : members) {
      ContractionReport r = coefficient_of_power(kernel_power(P, ell), model, ell);
      if (r.tau_ell >= worst.tau_ell) worst = r;
    }
    if (worst.tau_ell < 1.0) {
      worst.M = M;
      worst.k0 = ell;
      worst.tau = worst.tau_ell;
      return worst;
    }
  }
  throw NumericalError("no contraction lag k0 <= " + std::to_string(ell_max) + " with tau < 1");
}

double eccentricity(const CostModel& model, const Vector& pi, std::size_t y) {
  return model.cost.row(static_cast<Eigen::Index>(y)).dot(pi);
}

double eccentricity(const DistanceLike& d, const Vector& pi, const AugmentedState& y,
                    std::span<const AugmentedState> support) {
  if (static_cast<std::size_t>(pi.size()) != support.size()) throw DomainError("pi/support size mismatch");
  double e = 0.0;
  for (std::size_t k = 0; k < support.size(); ++k) e += d(y, support[k]) * pi(static_cast<Eigen::Index>(k));
  return e;
}

Vector eccentricities(const CostModel& model, const Vector& pi) { return model.cost * pi; }

double distance_to_stationarity(const Matrix& P, const Vector& pi, const CostModel& model, long ell) {
  const Matrix Pl = kernel_power(P, ell);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < Pl.rows(); ++i) {
    worst = std::max(worst, wasserstein_exact(model, Pl.row(i).transpose(), pi));
  }
  return worst;
}

PoissonSolution poisson_solve_direct(const Matrix& P, const Vector& f, const Vector& pi) {
  const Eigen::Index n = P.rows();
  if (f.size() != n) throw DomainError("integrand size does not match kernel");
  if (!f.allFinite()) throw DomainError("integrand must be finite");
  PoissonSolution sol;
  sol.f = f;
  sol.pi = pi;
  sol.pi_f = pi.dot(f);
  const Vector centred = f - Vector::Constant(n, sol.pi_f);
  const Matrix A = Matrix::Identity(n, n) - P + Vector::Ones(n) * pi.transpose();
  Eigen::PartialPivLU<Matrix> lu(A);
  sol.u = lu.solve(centred);
  sol.u += lu.solve(centred - A * sol.u);
  sol.u -= Vector::Constant(n, pi.dot(sol.u));
  sol.residual = ((sol.u - P * sol.u) - centred).cwiseAbs().maxCoeff();
  return sol;
}

Vector poisson_series(const Matrix& P, const Vector& f, const Vector& pi, long terms) {
  const double pi_f = pi.dot(f);
  Vector g = f - Vector::Constant(f.size(), pi_f);
  Vector sum = Vector::Zero(f.size());
  for (long ell = 0; ell < terms; ++ell) {
    sum += g;
    g = P * g;
    // P(c 1) = c 1, so recentring only removes accumulated rounding.
    g.array() -= pi.dot(g);
  }
  return sum;
}

PoissonSolution poisson_solve(const Matrix& P, const Vector& f) {
  const Vector pi = stationary_law(P);
  PoissonSolution sol = poisson_solve_direct(P, f, pi);
  if (sol.residual > tol::linear_solve) {
    throw NumericalError("Poisson residual " + std::to_string(sol.residual) + " exceeds tolerance");
  }

  // Tail of the series after L terms, using the trivial metric (E <= 1, M = 1):
  // sum_{ell > L} |P^ell f - pi f| <= k0 osc(f) tau^{floor((L+1)/k0)} / (1 - tau).
  const double osc = f.maxCoeff() - f.minCoeff();
  long k0 = 0;
  double tau = 1.0;
  Matrix Pl = P;
  for (long ell = 1; ell <= 64; ++ell) {
    const double t = tv_contraction(Pl);
    if (t < 1.0) {
      k0 = ell;
      tau = t;
      break;
    }
    Pl = Pl * P;
  }
  if (k0 == 0) {
    warn("poisson_solve: no total-variation contraction within 64 steps; series check skipped");
    return sol;
  }
  // Barely contracting blocks give astronomically long series; square the
  // block until it halves distances.
  while (tau > 0.5 && k0 < (1L << 30)) {
    Pl = Pl * Pl;
    k0 *= 2;
    tau = tv_contraction(Pl);
  }
  long blocks = 0;
  double tail = osc == 0.0 ? 0.0 : static_cast<double>(k0) * osc / (1.0 - tau);
  while (tail > tol::series_tail && blocks < 50'000'000) {
    ++blocks;
    tail *= tau;
  }
  const long terms = std::max<long>(1, blocks * k0);  // L + 1 = blocks * k0
  sol.series_terms = terms;
  sol.series_tail_bound = tail;
  const Vector series = poisson_series(P, f, pi, terms);
  sol.series_agreement = (series - sol.u).cwiseAbs().maxCoeff();
  sol.series_checked = true;
  if (sol.series_agreement > tol::cross_method * std::max(1.0, sol.u.cwiseAbs().maxCoeff())) {
    throw NumericalError("Poisson direct solve and truncated series disagree by " +
                         std::to_string(sol.series_agreement));
  }
  return sol;
}

PoissonBoundAudit poisson_bound_check(const PoissonSolution& sol, const CostModel& model,
                                      double lipschitz, const ContractionReport& report) {
  if (!(report.tau < 1.0)) throw DomainError("poisson_bound_check requires tau < 1");
  if (!(lipschitz >= 0.0)) throw DomainError("Lipschitz constant must be nonnegative");
  PoissonBoundAudit audit;
  const double factor = static_cast<double>(report.k0) * lipschitz *
                        std::pow(report.M, static_cast<double>(report.k0)) / (1.0 - report.tau);
  audit.bound = factor * eccentricities(model, sol.pi);
  audit.slack = audit.bound - sol.u.cwiseAbs();
  audit.min_slack = audit.slack.minCoeff();
  audit.ok = audit.min_slack >= -tol::inequality * std::max(1.0, audit.bound.maxCoeff());
  return audit;
}

DualityGap duality_gap(const CostModel& model, const Vector& mu1, const Vector& mu2,
                       std::size_t probe_count, std::uint64_t seed, std::span<const Vector> extra_probes) {
  DualityGap out;
  out.exact = wasserstein_exact(model, mu1, mu2);
  const Vector diff = mu1 - mu2;
  for (const Vector& psi : sample_lipschitz_functions(model.cost, probe_count, seed)) {
    out.lower = std::max(out.lower, std::abs(diff.dot(psi)));
  }
  for (const Vector& psi : extra_probes) {
    if (!is_lipschitz_one(psi, model.cost)) throw ContractViolation("supplied probe is not Lip_1");
    out.lower = std::max(out.lower, std::abs(diff.dot(psi)));
  }
  out.inequality_holds = out.lower <= out.exact + tol::inequality;
  return out;
}

std::vector<Vector> indicator_probes(std::size_t n) {
  if (n == 0 || n > 20) throw DomainError("indicator_probes supports 1..20 states");
  std::vector<Vector> out;
  const std::uint64_t count = std::uint64_t{1} << n;
  out.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    Vector psi(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) psi(static_cast<Eigen::Index>(i)) = (mask >> i) & 1U ? 1.0 : 0.0;
    out.push_back(std::move(psi));
  }
  return out;
}

LyapunovAudit lyapunov_audit(const Matrix& P, const LyapunovSpec& spec, std::span<const double> q_grid) {
  check_stochastic(P);
  spec.validate();
  if (spec.V.size() != P.rows()) throw DomainError("Lyapunov function size does not match kernel");
  const Vector PV = P * spec.V;
  const Vector drift_slack = spec.kappa * spec.V + Vector::Constant(spec.V.size(), spec.b) - PV;
  Eigen::Index worst = 0;
  const double min_drift = drift_slack.minCoeff(&worst);
  if (min_drift < -tol::inequality * std::max(1.0, PV.maxCoeff())) {
    throw AuditFailure("drift condition PV <= kappa V + b fails at state " + std::to_string(worst) +
                       " (slack " + std::to_string(min_drift) + ")");
  }
  LyapunovAudit audit;
  for (double q : q_grid) {
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("Lyapunov exponent q must lie in (0, 1]");
    const Vector Vq = spec.V.array().pow(q).matrix();
    const Vector lhs = P * Vq;
    const Vector rhs = std::pow(spec.kappa, q) * Vq + Vector::Constant(Vq.size(), std::pow(spec.b, q));
    const double slack = (rhs - lhs).minCoeff();
    audit.q.push_back(q);
    audit.worst_slack.push_back(slack);
    if (slack < -tol::inequality * std::max(1.0, lhs.maxCoeff())) audit.ok = false;
  }
  audit.pi_V = stationary_law(P).dot(spec.V);
  audit.pi_V_bound = spec.b / (1.0 - spec.kappa);
  if (audit.pi_V > audit.pi_V_bound * (1.0 + tol::inequality)) audit.ok = false;
  return audit;
}

MinorisationAudit minorisation_audit(const Matrix& P, std::span<const std::size_t> small_set, double delta) {
  check_stochastic(P);
  if (small_set.empty()) throw DomainError("minorisation_audit requires a nonempty small set");
  if (!(delta > 0.0)) throw DomainError("minorisation constant must be positive");
  MinorisationAudit audit;
  audit.eta = Vector::Zero(P.rows());
  for (std::size_t z : small_set) {
    if (z >= static_cast<std::size_t>(P.rows())) throw DomainError("small-set state out of range");
    double zeta = std::numeric_limits<double>::infinity();
    for (std::size_t x : small_set) zeta = std::min(zeta, P(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(z)));
    audit.eta(static_cast<Eigen::Index>(z)) = zeta;
  }
  audit.mass = audit.eta.sum();
  if (audit.mass > 0.0) audit.eta /= audit.mass;
  audit.ok = audit.mass >= delta;
  return audit;
}

}  // namespace air
