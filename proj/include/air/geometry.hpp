#pragma once

#include "air/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <variant>
#include <vector>

namespace air {

/// A point y = (x, phi) of the augmented space X x Phi. The primary
/// component is either a finite label or a real vector; phi is a finite
/// label (a one-element Phi is encoded by phi = 0 everywhere).
struct AugmentedState {
  std::variant<std::size_t, Vector> x;
  std::size_t phi = 0;

  static AugmentedState finite(std::size_t label, std::size_t phi = 0) { return {label, phi}; }
  static AugmentedState real(Vector v, std::size_t phi = 0) { return {std::move(v), phi}; }

  bool is_finite() const noexcept { return std::holds_alternative<std::size_t>(x); }
  std::size_t label() const { return std::get<std::size_t>(x); }
  const Vector& point() const { return std::get<Vector>(x); }
};

/// Component-wise; real vectors compare bitwise.
bool operator==(const AugmentedState& a, const AugmentedState& b);

struct AugmentedStateHash {
  std::size_t operator()(const AugmentedState& y) const noexcept;
};

/// States of a finite space with `nx` primary labels and `nphi` auxiliary
/// labels, in the order index = x * nphi + phi.
std::vector<AugmentedState> finite_support(std::size_t nx, std::size_t nphi = 1);

using StateFunction = std::function<double(const AugmentedState&)>;

/// V(y) = table[x] for finite states.
StateFunction table_function(Vector table);

enum class DistanceKind { trivial, v_weighted, weak_harris, custom };

/// Symmetric, point-separating cost on Y. Lower semi-continuity of custom
/// costs is a caller obligation.
class DistanceLike {
 public:
  using Fn = std::function<double(const AugmentedState&, const AugmentedState&)>;

  /// 1{y1 != y2}.
  static DistanceLike trivial();
  /// 1{y1 != y2} (V^q(y1) + V^q(y2)).
  static DistanceLike v_weighted(StateFunction V, double q);
  /// sqrt(base(y1, y2) (1 + V^q(y1) + V^q(y2))); base must map into [0, 1].
  static DistanceLike weak_harris(const DistanceLike& base, StateFunction V, double q);
  static DistanceLike custom(Fn fn, bool is_metric, bool bounded_by_one);

  double operator()(const AugmentedState& y1, const AugmentedState& y2) const;

  DistanceKind kind() const noexcept { return kind_; }
  bool is_metric() const noexcept { return is_metric_; }
  bool bounded_by_one() const noexcept { return bounded_by_one_; }
  double q() const noexcept { return q_; }
  /// V^q(y); 1 for kinds without a Lyapunov weight.
  double weight(const AugmentedState& y) const;

 private:
  DistanceKind kind_ = DistanceKind::trivial;
  bool is_metric_ = true;
  bool bounded_by_one_ = true;
  double q_ = 1.0;
  StateFunction V_;
  std::shared_ptr<const DistanceLike> base_;
  Fn custom_;
};

/// Distance matrix over a finite support, plus what the analysis engine needs
/// to cross-check closed forms.
struct CostModel {
  Matrix cost;
  DistanceKind kind = DistanceKind::custom;
  bool is_metric = false;
  Vector weight;  // V^q per state (v_weighted), ones otherwise

  std::size_t size() const noexcept { return static_cast<std::size_t>(cost.rows()); }
};

CostModel make_cost_model(const DistanceLike& d, std::span<const AugmentedState> support);

/// Trivial-metric cost model on n states without going through DistanceLike.
CostModel trivial_cost_model(std::size_t n);

/// Smallest L with |f(u) - f(v)| <= L d(u, v) on the support.
double lipschitz_constant(const Vector& f, const Matrix& cost);

/// True iff |psi(u) - psi(v)| <= d(u, v) for every pair (relative slack 1e-12).
bool is_lipschitz_one(const Vector& psi, const Matrix& cost);

/// Shortest-path closure of a cost matrix (the largest metric below it).
Matrix path_closure(const Matrix& cost);

/// psi(u) = min_v (seed(v) + cost(u, v)).
Vector mcshane_extension(const Vector& seed, const Matrix& cost);

/// `count` Lip_1 functions from random seeds via the McShane construction.
/// When the cost violates the triangle inequality the extension is redone
/// with the path closure, which is Lip_1 for the original cost as well.
std::vector<Vector> sample_lipschitz_functions(const Matrix& cost, std::size_t count,
                                               std::uint64_t seed);
std::vector<Vector> sample_lipschitz_functions(const DistanceLike& d,
                                               std::span<const AugmentedState> support,
                                               std::size_t count, std::uint64_t seed);

/// Lyapunov data for drift/minorisation audits.
struct LyapunovSpec {
  Vector V;  // V(y) >= 1 per state
  double kappa = 0.5;
  double b = 0.0;
  std::vector<std::size_t> small_set;
  double delta = 0.0;
  double v_bound = 0.0;

  void validate() const;
};

}  // namespace air
