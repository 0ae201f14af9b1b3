#include "air/schedule.hpp"

#include "air/errors.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace air {

namespace {

constexpr std::size_t kMaxCachedWindows = std::size_t{1} << 22;

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw NumericalError("adaptation time overflows 64-bit integer");
  }
  return out;
}

}  // namespace

std::uint64_t ceil_power(std::uint64_t j, double beta) {
  if (j == 0) throw DomainError("window_length requires j >= 1");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be > 0");
  const long double p = std::pow(static_cast<long double>(j), static_cast<long double>(beta));
  if (!(p < 0x1.0p62L)) throw NumericalError("window length overflows 64-bit integer");
  const long double nearest = std::nearbyint(p);
  if (std::fabs(p - nearest) <= tol::power_snap * std::max(1.0L, nearest)) {
    return static_cast<std::uint64_t>(nearest);
  }
  return static_cast<std::uint64_t>(std::ceil(p));
}

AirSchedule::AirSchedule(double beta, std::uint64_t cache_horizon) : beta_(beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be > 0");
  prefix_.push_back(0);
  // Cache one window past the horizon so lookups up to it never fall through.
  while (prefix_.size() < kMaxCachedWindows) {
    const std::uint64_t m = prefix_.size();
    prefix_.push_back(checked_add(prefix_.back(), ceil_power(m, beta_)));
    if (prefix_.back() > cache_horizon + 1) break;
  }
}

double AirSchedule::upper_constant() const noexcept {
  return std::pow(2.0, 1.0 + beta_) / (1.0 + beta_) + 1.0;
}

std::uint64_t AirSchedule::window_length(std::uint64_t j) const { return ceil_power(j, beta_); }

std::uint64_t AirSchedule::adaptation_time(std::uint64_t m) const {
  if (m < prefix_.size()) return prefix_[m];
  std::uint64_t t = prefix_.back();
  for (std::uint64_t j = prefix_.size(); j <= m; ++j) t = checked_add(t, ceil_power(j, beta_));
  return t;
}

Window AirSchedule::window_containing(std::uint64_t t) const {
  // Largest m with T_m <= t.
  if (t < prefix_.back()) {
    const auto it = std::upper_bound(prefix_.begin(), prefix_.end(), t);
    const auto m = static_cast<std::uint64_t>(std::distance(prefix_.begin(), it) - 1);
    return {m, prefix_[m], prefix_[m + 1]};
  }
  std::uint64_t m = prefix_.size() - 1;
  std::uint64_t start = prefix_.back();
  for (;;) {
    const std::uint64_t next = checked_add(start, ceil_power(m + 1, beta_));
    if (t < next) return {m, start, next};
    start = next;
    ++m;
  }
}

Window AirSchedule::window_index(std::uint64_t n) const {
  if (n == std::numeric_limits<std::uint64_t>::max()) throw NumericalError("n + 1 overflows");
  return window_containing(n + 1);
}

Window AirSchedule::installed_window(std::uint64_t n) const { return window_containing(n); }

Envelope AirSchedule::growth_envelope(std::uint64_t m) const {
  if (m == 0) throw DomainError("growth_envelope requires m >= 1");
  const double scale = std::pow(static_cast<double>(m), 1.0 + beta_);
  return {lower_constant() * scale, upper_constant() * scale};
}

}  // namespace air
