#include "air/decomposition.hpp"

#include "air/errors.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace air {

namespace {

struct Cached {
  const Matrix* P;
  const Vector* u;
  Vector Pu;
  double pi_h;
};

}  // namespace

DecompositionReport decompose(const FiniteTrajectory& traj, const Vector& h, const ParameterModels& models,
                              const AirSchedule& schedule, bool keep_paths) {
  if (traj.states.size() != traj.param_ids.size()) {
    throw DomainError("trajectory states and parameter ids differ in length");
  }
  DecompositionReport rep;
  if (traj.states.empty()) return rep;
  const std::uint64_t n = traj.horizon();
  rep.n = n;
  rep.m = schedule.installed_window(n).m;

  std::map<std::size_t, Cached> cache;
  auto lookup = [&](std::size_t id) -> const Cached& {
    if (auto it = cache.find(id); it != cache.end()) return it->second;
    const auto found = models.find(id);
    if (found == models.end()) throw DomainError("no Poisson solution for parameter id " + std::to_string(id));
    const ParameterModel& pm = found->second;
    if (pm.solution.u.size() != h.size() || pm.P.rows() != h.size()) {
      throw DomainError("model for parameter id " + std::to_string(id) + " has the wrong size");
    }
    Cached c{&pm.P, &pm.solution.u, pm.P * pm.solution.u, pm.solution.pi.dot(h)};
    return cache.emplace(id, std::move(c)).first->second;
  };
  auto state = [&](std::uint64_t i) { return static_cast<Eigen::Index>(traj.states[i]); };
  auto pid = [&](std::uint64_t i) { return traj.param_ids[i]; };

  // Parameters may only change at adaptation times.
  for (std::uint64_t i = 1; i <= n; ++i) {
    if (pid(i) != pid(i - 1) && schedule.installed_window(i).start != i) {
      throw DomainError("parameter changes at time " + std::to_string(i) + ", which is not an adaptation time");
    }
  }

  if (keep_paths) {
    rep.deltas.reserve(n);
    rep.M_path.reserve(n);
  }
  for (std::uint64_t j = 1; j <= n; ++j) {
    const Cached& prev = lookup(pid(j - 1));
    rep.lhs += h(state(j)) - prev.pi_h;
    const double delta = (*prev.u)(state(j)) - prev.Pu(state(j - 1));
    rep.M_n += delta;
    rep.max_abs_delta = std::max(rep.max_abs_delta, std::abs(delta));
    rep.sum_sq_delta += delta * delta;
    if (keep_paths) {
      rep.deltas.push_back(delta);
      rep.M_path.push_back(rep.M_n);
    }
    const Cached& cur = lookup(pid(j));
    const double term = (*cur.u)(state(j)) - (*prev.u)(state(j));
    if (term != 0.0 && schedule.installed_window(j).start != j) ++rep.nonzero_within_window_terms;
    rep.general_adaptation_sum += term;
  }

  for (std::uint64_t k = 0; k < rep.m; ++k) {
    const std::uint64_t t_next = schedule.adaptation_time(k + 1);
    const std::uint64_t t_cur = schedule.adaptation_time(k);
    rep.R_m += (*lookup(pid(t_next)).u)(state(t_next)) - (*lookup(pid(t_cur)).u)(state(t_next));
  }

  rep.g_n = h(state(n)) - h(state(0)) + (*lookup(pid(0)).u)(state(0)) - (*lookup(pid(n)).u)(state(n));
  rep.identity_residual = std::abs(rep.lhs - rep.total());
  return rep;
}

DecompositionReport decompose_estimate(const FiniteTrajectory& trajectory, const Vector& h,
                                       const std::map<std::size_t, Matrix>& kernels,
                                       const AirSchedule& schedule, long terms, long k0, double tau) {
  if (terms < 1) throw DomainError("truncation needs at least one term");
  ParameterModels models;
  for (const auto& [id, P] : kernels) {
    PoissonSolution sol;
    sol.pi = stationary_law(P);
    sol.f = h;
    sol.pi_f = sol.pi.dot(h);
    sol.u = poisson_series(P, h, sol.pi, terms);
    sol.residual = ((sol.u - P * sol.u) - (h.array() - sol.pi_f).matrix()).cwiseAbs().maxCoeff();
    models.emplace(id, ParameterModel{P, std::move(sol)});
  }
  DecompositionReport rep = decompose(trajectory, h, models, schedule, true);
  rep.estimate_mode = true;
  const double osc = h.maxCoeff() - h.minCoeff();
  const long blocks = terms / std::max<long>(k0, 1);
  rep.truncation_bound = tau < 1.0 ? static_cast<double>(k0) * osc * std::pow(tau, static_cast<double>(blocks)) / (1.0 - tau)
                                   : std::numeric_limits<double>::infinity();
  return rep;
}

double BoundInputs::poisson_sup() const {
  if (!(tau < 1.0)) throw DomainError("bound inputs require tau < 1");
  return static_cast<double>(k0) * L * std::pow(M, static_cast<double>(k0)) * K / (1.0 - tau);
}

MartingaleAudit martingale_audit(std::span<const DecompositionReport> reports, const BoundInputs& inputs,
                                 double z_limit) {
  MartingaleAudit audit;
  audit.bound = 2.0 * inputs.poisson_sup();
  for (const DecompositionReport& r : reports) audit.max_abs_delta = std::max(audit.max_abs_delta, r.max_abs_delta);
  audit.ok = audit.max_abs_delta <= audit.bound * (1.0 + tol::inequality) + tol::inequality;

  if (reports.size() >= 2) {
    std::size_t steps = reports.front().deltas.size();
    for (const DecompositionReport& r : reports) steps = std::min(steps, r.deltas.size());
    const double count = static_cast<double>(reports.size());
    for (std::size_t j = 0; j < steps; ++j) {
      double mean = 0.0, sq = 0.0;
      for (const DecompositionReport& r : reports) {
        mean += r.deltas[j];
        sq += r.deltas[j] * r.deltas[j];
      }
      mean /= count;
      const double var = (sq - count * mean * mean) / (count - 1.0);
      const double z = var > 0.0 ? mean / std::sqrt(var / count) : 0.0;
      audit.z_scores.push_back(z);
      audit.max_abs_z = std::max(audit.max_abs_z, std::abs(z));
    }
    if (audit.max_abs_z > z_limit) audit.ok = false;
  }
  return audit;
}

RemainderAudit remainder_audit(const DecompositionReport& report, const BoundInputs& inputs, std::uint64_t n,
                               double beta) {
  if (!(beta > 0.0)) throw DomainError("beta must be > 0");
  RemainderAudit audit;
  const double sup_u = inputs.poisson_sup();
  const double c_beta = 1.0 / (1.0 + beta);
  const double exponent = 1.0 / (1.0 + beta);
  const double nn = static_cast<double>(std::max<std::uint64_t>(n, 1));
  audit.m_bound = std::pow(2.0 * nn / c_beta, exponent);
  audit.bound = 2.0 * audit.m_bound * sup_u;
  audit.literal_bound = std::pow(nn, exponent) * std::pow(2.0 * c_beta, exponent) * sup_u;
  audit.value = report.R_m;
  audit.slack = audit.bound - std::abs(report.R_m);
  audit.ok = audit.slack >= -tol::inequality * std::max(1.0, audit.bound);
  return audit;
}

}  // namespace air
