#pragma once

#include <cstdint>
#include <vector>

namespace air {

/// Bounds [start, end) of an adaptation window together with its index.
struct Window {
  std::uint64_t m = 0;
  std::uint64_t start = 0;
  std::uint64_t end = 0;

  bool operator==(const Window&) const = default;
};

struct Envelope {
  double lower = 0.0;
  double upper = 0.0;
};

/// The increasingly-rare adaptation clock: window lengths k_j = ceil(j^beta)
/// and adaptation times T_m = k_1 + ... + k_m with T_0 = 0.
///
/// Prefix sums are cached at construction up to `cache_horizon` (in steps);
/// queries beyond the cache are answered by continuing the sum, so the object
/// stays immutable and may be shared between threads.
class AirSchedule {
 public:
  explicit AirSchedule(double beta, std::uint64_t cache_horizon = 10'000'000);

  double beta() const noexcept { return beta_; }

  /// k_j for j >= 1.
  std::uint64_t window_length(std::uint64_t j) const;

  /// T_m; throws NumericalError on 64-bit overflow.
  std::uint64_t adaptation_time(std::uint64_t m) const;

  /// The unique m with T_m <= n+1 < T_{m+1}, plus [T_m, T_{m+1}).
  Window window_index(std::uint64_t n) const;

  /// Window holding time n itself: T_m <= n < T_{m+1}. Gamma_n is the
  /// parameter installed at T_m, and m is the number of adaptations in [1, n].
  Window installed_window(std::uint64_t n) const;

  /// Explicit constants for c m^{1+beta} <= T_m <= C m^{1+beta}:
  /// c = 1/(1+beta), C = 2^{1+beta}/(1+beta) + 1.
  Envelope growth_envelope(std::uint64_t m) const;

  double lower_constant() const noexcept { return 1.0 / (1.0 + beta_); }
  double upper_constant() const noexcept;

 private:
  Window window_containing(std::uint64_t t) const;

  double beta_;
  std::vector<std::uint64_t> prefix_;  // prefix_[m] = T_m
};

/// ceil(j^beta) with exact integer powers snapped (relative tol 1e-9).
std::uint64_t ceil_power(std::uint64_t j, double beta);

}  // namespace air
