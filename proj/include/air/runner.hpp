#pragma once

#include "air/adaptation.hpp"
#include "air/decomposition.hpp"
#include "air/kernels.hpp"
#include "air/schedule.hpp"
#include "air/types.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace air {

struct RateSpec {
  enum class Kind { sqrt_log, poly };
  Kind kind = Kind::sqrt_log;
  double epsilon = 0.5;
  std::uint64_t n_min = 2;

  bool operator==(const RateSpec&) const = default;
};

/// r(n) = sqrt(n) (ln n)^{1/2 + eps} or n^{1/2 + eps}, for n >= n_min.
double rate_value(std::uint64_t n, const RateSpec& spec);

struct KernelSpec {
  std::string family = "two_state";  // two_state | doeblin | matrix_file | rwm
  // doeblin: Metropolis base kernels for a random target pi, anchor eta = pi.
  std::size_t states = 5;
  double alpha = 0.5;
  std::size_t members = 3;
  std::uint64_t family_seed = 1;
  // matrix_file
  std::string path;
  // rwm
  std::size_t dim = 1;
  std::string target = "std_normal";  // std_normal | gaussian_mixture
  std::vector<double> mixture_weights;
  std::vector<double> mixture_means;
  std::vector<double> mixture_sds;
  double a1 = 0.01;
  double a2 = 100.0;

  bool operator==(const KernelSpec&) const = default;
};

struct RuleSpec {
  std::string rule = "fixed_sequence";  // fixed_sequence | acceptance_targeting | empirical_moment | counterexample
  std::vector<double> values;
  bool cyclic = false;
  double target_rate = 0.44;
  double gain_exponent = 0.6;
  double scale = 2.38 * 2.38;
  double ridge = 1e-6;

  bool operator==(const RuleSpec&) const = default;
};

struct IntegrandSpec {
  std::vector<double> values;  // finite families: f over X
  unsigned power = 1;          // rwm: f(x) = x_component^power
  std::size_t component = 0;

  bool operator==(const IntegrandSpec&) const = default;
};

struct RunConfig {
  KernelSpec kernel;
  RuleSpec adaptation;
  double beta = 1.0;
  std::vector<double> y0{0.0};
  std::vector<double> gamma0{0.25};
  std::uint64_t horizon = 1000;
  std::uint64_t replications = 1;
  std::uint64_t seed = 0;
  IntegrandSpec integrand;
  RateSpec rate;
  double rho = 0.5;        // waning exponent reported in studies
  double threshold = 0.1;  // |tail normalised value| threshold reported in studies
  std::vector<double> sweep_betas{0.5, 1.0, 2.0};
  std::vector<double> sweep_epsilons{0.1, 0.25, 0.5};
  double sweep_p = 0.0;    // moment order for the drift condition; 0 = none
  long ell_max = 64;
  std::size_t probes = 64;
  std::vector<double> q_grid{0.25, 0.5, 0.75, 1.0};

  bool operator==(const RunConfig&) const = default;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Finite-state chain built from a config: family, integrand table, nu(f).
struct FiniteModel {
  std::shared_ptr<const FiniteKernelFamily> family;
  Vector f;
  double nu_f = 0.0;
};

struct RwmModel {
  LogDensity log_density;
  std::size_t dim = 1;
  ParameterBox box;
  unsigned power = 1;
  std::size_t component = 0;
  double nu_f = 0.0;
};

using ChainModel = std::variant<FiniteModel, RwmModel>;

ChainModel build_model(const RunConfig& config);

/// Base kernels, target and members of the config's Doeblin family.
FiniteKernelFamily build_doeblin(const KernelSpec& spec, Vector* target = nullptr);

UpdateRule build_rule(const RunConfig& config, const ChainModel& model);

/// Geometric reporting checkpoints ceil(n_min 1.1^k), deduplicated, plus N.
std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_min, std::uint64_t horizon);

/// 1/r(n) for n = 0..horizon (zero below n_min); shared across replications.
std::shared_ptr<const std::vector<double>> inverse_rate_table(const RateSpec& spec, std::uint64_t horizon);

struct RateDiagnostics {
  std::uint64_t n_min = 2;
  std::vector<std::uint64_t> checkpoints;
  std::vector<double> normalized;  // S_n / r(n), S_n = sum_{j<=n} (f(X_j) - nu f)
  std::vector<double> bound_form;  // C_hat r(n) / n at the checkpoints
  double c_hat = 0.0;              // max_{n_min <= n <= N} |S_n| / r(n)
  double tail_value = 0.0;         // S_N / r(N)
};

/// Single-pass partial sums, normalised values and running C_hat.
class NormalizedSums {
 public:
  NormalizedSums(const RateSpec& spec, std::uint64_t horizon,
                 std::shared_ptr<const std::vector<double>> inverse_rate = nullptr);

  /// Adds f(X_n) - nu(f) for the next n (n = 1, 2, ...).
  void add(double centred);
  std::uint64_t n() const noexcept { return n_; }
  double partial_sum() const noexcept { return sum_; }
  RateDiagnostics finish() const;

 private:
  RateSpec spec_;
  std::uint64_t horizon_;
  std::shared_ptr<const std::vector<double>> inverse_rate_;
  std::vector<std::uint64_t> checkpoints_;
  std::size_t next_checkpoint_ = 0;
  std::uint64_t n_ = 0;
  double sum_ = 0.0;
  RateDiagnostics diag_;
};

RateDiagnostics normalized_sums(std::span<const double> f_values, double nu_f, const RateSpec& spec);

struct WindowLogEntry {
  std::uint64_t m = 0;
  std::uint64_t time = 0;      // T_m
  Parameter parameter;         // Gamma_{T_m}
  double acceptance_rate = 0.0;  // of the window that ended at T_m
};

struct RecordedTrajectory {
  std::vector<std::vector<double>> states;  // Y_0..Y_N components
  std::vector<std::uint64_t> windows;       // m with T_m <= n < T_{m+1}
  std::vector<std::size_t> param_ids;
  std::vector<Parameter> params;            // distinct parameters by id
  std::vector<double> f_values;

  FiniteTrajectory finite() const;
};

struct RunResult {
  RateDiagnostics diagnostics;
  std::vector<WindowLogEntry> windows;  // windows[0] is Gamma_0 at T_0 = 0
  double mean_f = 0.0;                  // S_N f
  bool stayed_at_start = true;          // Y_n == Y_0 for all n <= N
  double acceptance_rate = 1.0;
  std::optional<RecordedTrajectory> trajectory;
};

struct RunOptions {
  bool record_trajectory = false;
  std::shared_ptr<const std::vector<double>> inverse_rate;
};

/// Simulates Y_1..Y_N with Y_{n+1} ~ P_{Gamma_n}(Y_n, .), adapting exactly at
/// T_1, T_2, .... Deterministic given (config, seed).
RunResult run_air(const RunConfig& config, const ChainModel& model, std::uint64_t seed,
                  const RunOptions& options = {});
RunResult run_air(const RunConfig& config, std::uint64_t seed, const RunOptions& options = {});

struct ReplicationRecord {
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  double c_hat = 0.0;
  double tail_value = 0.0;
  double mean_f = 0.0;
  bool stuck = false;
  double acceptance_rate = 0.0;
  double waning_final = 0.0;
  bool waning_decreasing = true;
  std::uint64_t adaptations = 0;
  Parameter final_parameter;
};

struct StudySummary {
  std::uint64_t replications = 0;
  std::uint64_t horizon = 0;
  double nu_f = 0.0;
  double c_hat_median = 0.0;
  double c_hat_q05 = 0.0;
  double c_hat_q95 = 0.0;
  double abs_tail_median = 0.0;
  double threshold = 0.0;
  double fraction_below_threshold = 0.0;
  double mean_f = 0.0;
  double mean_f_se = 0.0;
  double lln_z = 0.0;
  bool lln_failure = false;
  double stuck_fraction = 0.0;
  double stuck_se = 0.0;
  bool counterexample = false;
  double stay_probability = 0.0;  // exact P[stuck through N] (counterexample)
  double theta = 0.0;             // infinite-product limit (counterexample)
  double stuck_z = 0.0;
  double waning_decreasing_fraction = 0.0;
};

struct Study {
  RunConfig config;
  std::vector<ReplicationRecord> records;  // ordered by index
  StudySummary summary;
  bool failed = false;
  std::string failure;
};

/// R independent replications with seeds derive_seed(master, r), spread over
/// `workers` threads; results are identical for any worker count.
Study replicate(const RunConfig& config, unsigned workers = 1);

StudySummary summarize(const RunConfig& config, const ChainModel& model,
                       std::span<const ReplicationRecord> records);

/// Infinite product prod_{j>=0} (1 - e^{-j-1}) to ~1e-15.
double counterexample_theta();

struct SweepRow {
  double beta = 0.0;
  double epsilon = 0.0;
  bool t_large_beta = false;   // beta >= 1, eps > 0; rate sqrt_log
  bool t_small_beta = false;   // beta in (0,1), eps > 1/(1+beta) - 1/2; rate poly
  bool t_lyapunov = false;     // eps > max{0, 1/(1+beta) + 1/p - 1/2}; rate poly
  bool t_waning = false;       // beta in (0,1), beta >= 2 rho - 1; rate sqrt_log
  double lyapunov_threshold = 0.0;
  bool measured = false;
  std::string rate;
  double abs_tail_median = 0.0;
  double fraction_below_threshold = 0.0;
  double waning_final_median = 0.0;
};

/// Hypothesis flags for one (beta, eps) cell.
SweepRow sweep_flags(double beta, double epsilon, double p, double rho);

/// Flags for every cell of the grid plus the measured tail value (median over
/// the config's replications) on each admissible cell.
std::vector<SweepRow> theorem_sweep(const RunConfig& config, std::span<const double> betas,
                                    std::span<const double> epsilons, double p, unsigned workers = 1,
                                    bool measure = true);

}  // namespace air
