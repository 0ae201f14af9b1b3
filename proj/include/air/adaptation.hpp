#pragma once

#include "air/kernels.hpp"
#include "air/schedule.hpp"
#include "air/types.hpp"

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace air {

/// Constant-memory summary of (Y_0, ..., Y_n, Gamma_0, ..., Gamma_{n-1}):
/// acceptance counts of the current window and running moments of all
/// states seen so far.
class HistorySummary {
 public:
  HistorySummary() = default;
  explicit HistorySummary(std::size_t dim);

  void record_state(const Vector& x);
  void record_step(bool accepted);
  /// Clears the per-window acceptance counters (called after an adaptation).
  void start_window();

  std::uint64_t window_steps() const noexcept { return window_steps_; }
  std::uint64_t window_accepted() const noexcept { return window_accepted_; }
  double window_acceptance_rate() const;

  std::uint64_t count() const noexcept { return count_; }
  const Vector& mean() const noexcept { return mean_; }
  /// Unbiased sample covariance; requires count() >= 2.
  Matrix covariance() const;

 private:
  std::uint64_t window_steps_ = 0;
  std::uint64_t window_accepted_ = 0;
  std::uint64_t count_ = 0;
  Vector mean_;
  Matrix m2_;
};

struct FixedSequence {
  std::vector<Parameter> values;  // values[m] is installed at T_m
  bool cyclic = false;            // wrap around instead of holding the last value
};

struct AcceptanceTargeting {
  double target_rate = 0.44;
  double gain_exponent = 0.6;  // gain_m = m^{-gain_exponent}
};

struct EmpiricalMoment {
  double scale = 2.38 * 2.38;
  double ridge = 1e-6;
};

/// The non-convergent two-state construction: at T_m install the gamma whose
/// stay-probability over that epoch is 1 - e^{-m-1}.
struct CounterexampleRule {};

using UpdateKind = std::variant<FixedSequence, AcceptanceTargeting, EmpiricalMoment, CounterexampleRule>;

struct UpdateRule {
  UpdateKind kind;
  ParameterBox box;
};

/// Gamma_{T_m} from the history summary. Output is always projected into the
/// rule's box. Moment rules with fewer than two recorded states return the
/// current parameter unchanged.
Parameter apply_update(const UpdateRule& rule, const HistorySummary& history, std::uint64_t m,
                       const Parameter& current, const AirSchedule& schedule);

/// gamma_j = 1 - (1 - e^{-(j+1)})^{1/k_j} with k_0 = 1.
double counterexample_gamma(std::uint64_t j, const AirSchedule& schedule);

/// Gamma installed at T_j for the two-state counterexample: solves
/// (1 - gamma)^{k_{j+1}} = 1 - e^{-(j+1)}, k_{j+1} being the length of the
/// epoch [T_j, T_{j+1}) during which it is used.
double epoch_counterexample_gamma(std::uint64_t j, const AirSchedule& schedule);

/// prod_{j=0}^{last} (1 - e^{-j-1}).
double counterexample_stay_probability(std::uint64_t last);

/// (1/k^rho) sum_{j=1}^k |Gamma_{T_j} - Gamma_{T_{j-1}}| over the first k+1
/// entries of `params`.
double waning_statistic(std::span<const Parameter> params, double rho, std::uint64_t k);

}  // namespace air
