#include "air/adaptation.hpp"

#include "air/errors.hpp"

#include <cmath>

namespace air {

HistorySummary::HistorySummary(std::size_t dim)
    : mean_(Vector::Zero(static_cast<Eigen::Index>(dim))),
      m2_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

void HistorySummary::record_state(const Vector& x) {
  if (mean_.size() == 0) {
    mean_ = Vector::Zero(x.size());
    m2_ = Matrix::Zero(x.size(), x.size());
  }
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  m2_.noalias() += delta * (x - mean_).transpose();
}

void HistorySummary::record_step(bool accepted) {
  ++window_steps_;
  if (accepted) ++window_accepted_;
}

void HistorySummary::start_window() {
  window_steps_ = 0;
  window_accepted_ = 0;
}

double HistorySummary::window_acceptance_rate() const {
  return window_steps_ == 0 ? 0.0 : static_cast<double>(window_accepted_) / static_cast<double>(window_steps_);
}

Matrix HistorySummary::covariance() const {
  if (count_ < 2) throw DomainError("covariance needs at least two states");
  return m2_ / static_cast<double>(count_ - 1);
}

namespace {

struct UpdateVisitor {
  const HistorySummary& history;
  std::uint64_t m;
  const Parameter& current;
  const AirSchedule& schedule;

  Parameter operator()(const FixedSequence& rule) const {
    if (rule.values.empty()) throw DomainError("fixed_sequence has no values");
    const std::size_t size = rule.values.size();
    const std::size_t index = rule.cyclic ? static_cast<std::size_t>(m % size)
                                          : static_cast<std::size_t>(std::min<std::uint64_t>(m, size - 1));
    return rule.values[index];
  }

  Parameter operator()(const AcceptanceTargeting& rule) const {
    if (history.window_steps() == 0) return current;
    const double gain = std::pow(static_cast<double>(std::max<std::uint64_t>(m, 1)), -rule.gain_exponent);
    return current * std::exp(gain * (history.window_acceptance_rate() - rule.target_rate));
  }

  Parameter operator()(const EmpiricalMoment& rule) const {
    if (history.count() < 2) return current;
    Matrix cov = history.covariance();
    cov.diagonal().array() += rule.ridge;
    cov *= rule.scale;
    if (current.size() == 1) return scalar_parameter(cov(0, 0));
    return Eigen::Map<const Parameter>(cov.data(), cov.size());
  }

  Parameter operator()(const CounterexampleRule&) const {
    return scalar_parameter(epoch_counterexample_gamma(m, schedule));
  }
};

}  // namespace

Parameter apply_update(const UpdateRule& rule, const HistorySummary& history, std::uint64_t m,
                       const Parameter& current, const AirSchedule& schedule) {
  return rule.box.project(std::visit(UpdateVisitor{history, m, current, schedule}, rule.kind));
}

namespace {

double gamma_for_length(std::uint64_t j, std::uint64_t length) {
  // 1 - (1 - e^{-(j+1)})^{1/k}, written to keep precision when the result is tiny.
  const double log_stay = std::log1p(-std::exp(-static_cast<double>(j + 1)));
  return -std::expm1(log_stay / static_cast<double>(length));
}

}  // namespace

double counterexample_gamma(std::uint64_t j, const AirSchedule& schedule) {
  return gamma_for_length(j, j == 0 ? 1 : schedule.window_length(j));
}

double epoch_counterexample_gamma(std::uint64_t j, const AirSchedule& schedule) {
  return gamma_for_length(j, schedule.window_length(j + 1));
}

double counterexample_stay_probability(std::uint64_t last) {
  double log_p = 0.0;
  for (std::uint64_t j = 0; j <= last; ++j) log_p += std::log1p(-std::exp(-static_cast<double>(j + 1)));
  return std::exp(log_p);
}

double waning_statistic(std::span<const Parameter> params, double rho, std::uint64_t k) {
  if (k == 0) throw DomainError("waning_statistic requires k >= 1");
  if (params.size() < k + 1) throw DomainError("waning_statistic needs k + 1 parameters");
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("rho must lie in (0, 1)");
  double total = 0.0;
  for (std::uint64_t j = 1; j <= k; ++j) total += (params[j] - params[j - 1]).norm();
  return total / std::pow(static_cast<double>(k), rho);
}

}  // namespace air
