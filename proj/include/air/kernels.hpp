#pragma once

#include "air/rng.hpp"
#include "air/types.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace air {

/// Compact parameter set with a projection onto it.
struct ParameterBox {
  enum class Kind { interval, eigen_box, finite_index };

  Kind kind = Kind::interval;
  double lo = 0.0;          // interval: componentwise; eigen_box: a1
  double hi = 1.0;          // interval: componentwise; eigen_box: a2
  std::size_t dim = 1;      // eigen_box: matrix dimension
  std::size_t count = 0;    // finite_index: number of members

  static ParameterBox interval(double lo, double hi);
  static ParameterBox eigen_box(std::size_t dim, double a1, double a2);
  static ParameterBox finite_index(std::size_t count);

  bool contains(const Parameter& p, double slack = 1e-12) const;
  /// Clamp (interval), eigenvalue clip (eigen_box) or round-and-clamp (finite).
  Parameter project(const Parameter& p) const;

  bool operator==(const ParameterBox&) const = default;
};

/// Which of the standard ergodicity settings a family is declared to satisfy.
struct AssumptionFlags {
  bool uniform_ergodicity = false;
  bool drift_minorisation = false;
  bool weak_harris = false;
  double lambda = 0.0;  // declared (Lambda, tau) of simultaneous uniform ergodicity
  double tau = 1.0;
};

void check_stochastic(const Matrix& P);

/// True iff some power of P is strictly positive (Wielandt bound).
bool is_primitive(const Matrix& P);

/// Exact P^ell by repeated squaring.
template <typename Derived>
Matrix kernel_power(const Eigen::MatrixBase<Derived>& P, long ell) {
  Matrix result = Matrix::Identity(P.rows(), P.cols());
  Matrix base = P;
  for (; ell > 0; ell >>= 1) {
    if (ell & 1) result = result * base;
    if (ell > 1) base = base * base;
  }
  return result;
}

/// [[1 - g, g], [g, 1 - g]] for g in (0, 1).
Matrix two_state_matrix(double gamma);

/// Metropolis-Hastings matrix with proposal Q and target pi (both strictly
/// positive where needed); reversible with respect to pi.
Matrix metropolis_matrix(const Matrix& proposal, const Vector& target);

/// Parameterised finite-state transition law P_gamma with optional invariant
/// law. Parameters are scalars (size-1 vectors) for finite families.
class FiniteKernelFamily {
 public:
  using MatrixFn = std::function<Matrix(const Parameter&)>;
  using InvariantFn = std::function<Vector(const Parameter&)>;

  FiniteKernelFamily(std::string name, std::size_t states, ParameterBox box, MatrixFn matrix,
                     std::optional<InvariantFn> invariant, AssumptionFlags flags);

  const std::string& name() const noexcept { return name_; }
  std::size_t states() const noexcept { return states_; }
  const ParameterBox& box() const noexcept { return box_; }
  const AssumptionFlags& flags() const noexcept { return flags_; }

  /// Checked matrix (row-stochastic within 1e-12).
  Matrix matrix(const Parameter& gamma) const;
  bool has_invariant() const noexcept { return invariant_.has_value(); }
  /// Declared invariant law, or the computed stationary law if none declared.
  Vector invariant(const Parameter& gamma) const;

  /// Representative parameters: the members of a finite index set, or a
  /// uniform grid of `grid` points across an interval.
  std::vector<Parameter> parameter_grid(std::size_t grid = 19) const;

 private:
  std::string name_;
  std::size_t states_;
  ParameterBox box_;
  MatrixFn matrix_;
  std::optional<InvariantFn> invariant_;
  AssumptionFlags flags_;
};

FiniteKernelFamily two_state_family();

/// P_gamma = (1 - alpha) Q_gamma + alpha 1 eta^T over the finite index set of
/// base matrices. Tagged uniformly ergodic with Lambda = 1, tau = 1 - alpha.
FiniteKernelFamily doeblin_family(std::vector<Matrix> base, double alpha, Vector eta);

/// Family whose members are the listed matrices (finite index parameter).
FiniteKernelFamily matrix_family(std::vector<Matrix> members, std::string name = "matrix_file");

/// Cached inverse-CDF sampler for one fixed matrix.
class RowSampler {
 public:
  explicit RowSampler(const Matrix& P);
  std::size_t operator()(std::size_t from, Rng& rng) const;

 private:
  Matrix cdf_;  // row-major cumulative sums; last column forced to 1
};

using LogDensity = std::function<double(const Vector&)>;

struct RwmResult {
  Vector x;
  bool accepted = false;
};

/// Proposal covariance from a parameter: gamma * I for a scalar, otherwise the
/// (dim x dim) matrix stored column-major.
Matrix proposal_covariance(const Parameter& gamma, std::size_t dim);

/// One random-walk Metropolis step x' = x + gamma^{1/2} xi. Parameters outside
/// `box` are projected back first (and `clamped` is set when provided).
RwmResult rwm_step(const Vector& x, const Parameter& gamma, const LogDensity& log_density,
                   Rng& rng, const ParameterBox& box, bool* clamped = nullptr);

/// Same step with a precomputed lower Cholesky factor and log p(x).
RwmResult rwm_step_factored(const Vector& x, double log_px, const Matrix& chol,
                            const LogDensity& log_density, Rng& rng, double* log_pnew);

/// Plain-text matrices: one row per line, whitespace-separated decimals;
/// blank lines or lines starting with "---" separate matrices; '#' comments.
std::vector<Matrix> read_matrices(std::istream& in);
std::vector<Matrix> read_matrices_file(const std::string& path);
void write_matrix(std::ostream& out, const Matrix& P);

}  // namespace air
