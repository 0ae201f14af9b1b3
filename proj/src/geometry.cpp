#include "air/geometry.hpp"

#include "air/errors.hpp"
#include "air/rng.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace air {

bool operator==(const AugmentedState& a, const AugmentedState& b) {
  if (a.phi != b.phi || a.x.index() != b.x.index()) return false;
  if (a.is_finite()) return a.label() == b.label();
  const Vector& u = a.point();
  const Vector& v = b.point();
  return u.size() == v.size() &&
         std::memcmp(u.data(), v.data(), sizeof(double) * static_cast<std::size_t>(u.size())) == 0;
}

std::size_t AugmentedStateHash::operator()(const AugmentedState& y) const noexcept {
  std::uint64_t h = splitmix64(y.phi);
  if (y.is_finite()) return splitmix64(h ^ y.label());
  const Vector& v = y.point();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, v.data() + i, sizeof bits);
    h = splitmix64(h ^ bits);
  }
  return h;
}

std::vector<AugmentedState> finite_support(std::size_t nx, std::size_t nphi) {
  if (nx == 0 || nphi == 0) throw DomainError("finite_support requires nonempty X and Phi");
  std::vector<AugmentedState> out;
  out.reserve(nx * nphi);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t phi = 0; phi < nphi; ++phi) out.push_back(AugmentedState::finite(x, phi));
  return out;
}

StateFunction table_function(Vector table) {
  return [t = std::move(table)](const AugmentedState& y) {
    const std::size_t i = y.label();
    if (i >= static_cast<std::size_t>(t.size())) throw DomainError("state label outside table");
    return t(static_cast<Eigen::Index>(i));
  };
}

DistanceLike DistanceLike::trivial() { return DistanceLike{}; }

DistanceLike DistanceLike::v_weighted(StateFunction V, double q) {
  if (!(q > 0.0)) throw DomainError("v_weighted requires q > 0");
  DistanceLike d;
  d.kind_ = DistanceKind::v_weighted;
  d.is_metric_ = true;
  d.bounded_by_one_ = false;
  d.q_ = q;
  d.V_ = std::move(V);
  return d;
}

DistanceLike DistanceLike::weak_harris(const DistanceLike& base, StateFunction V, double q) {
  if (!(q > 0.0)) throw DomainError("weak_harris requires q > 0");
  DistanceLike d;
  d.kind_ = DistanceKind::weak_harris;
  d.is_metric_ = false;
  d.bounded_by_one_ = false;
  d.q_ = q;
  d.V_ = std::move(V);
  d.base_ = std::make_shared<const DistanceLike>(base);
  return d;
}

DistanceLike DistanceLike::custom(Fn fn, bool is_metric, bool bounded_by_one) {
  DistanceLike d;
  d.kind_ = DistanceKind::custom;
  d.is_metric_ = is_metric;
  d.bounded_by_one_ = bounded_by_one;
  d.custom_ = std::move(fn);
  return d;
}

double DistanceLike::weight(const AugmentedState& y) const {
  if (!V_) return 1.0;
  const double v = V_(y);
  if (!(v >= 1.0) || !std::isfinite(v)) throw ContractViolation("Lyapunov weight V must be >= 1");
  return std::pow(v, q_);
}

double DistanceLike::operator()(const AugmentedState& y1, const AugmentedState& y2) const {
  switch (kind_) {
    case DistanceKind::trivial:
      return y1 == y2 ? 0.0 : 1.0;
    case DistanceKind::v_weighted:
      return y1 == y2 ? 0.0 : weight(y1) + weight(y2);
    case DistanceKind::weak_harris: {
      const double base = (*base_)(y1, y2);
      if (base < 0.0 || base > 1.0) {
        throw ContractViolation("weak_harris base distance must map into [0, 1]");
      }
      return std::sqrt(base * (1.0 + (weight(y1) + weight(y2))));
    }
    case DistanceKind::custom:
      return custom_(y1, y2);
  }
  return 0.0;
}

CostModel make_cost_model(const DistanceLike& d, std::span<const AugmentedState> support) {
  const auto n = static_cast<Eigen::Index>(support.size());
  if (n == 0) throw DomainError("empty support");
  CostModel model;
  model.kind = d.kind();
  model.is_metric = d.is_metric();
  model.cost = Matrix::Zero(n, n);
  model.weight = Vector::Ones(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    model.weight(i) = d.weight(support[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = d(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
      const double c_rev =
          d(support[static_cast<std::size_t>(j)], support[static_cast<std::size_t>(i)]);
      if (c != c_rev) throw ContractViolation("distance-like function is not symmetric");
      if (!(c > 0.0)) throw ContractViolation("distance-like function does not separate points");
      model.cost(i, j) = model.cost(j, i) = c;
    }
    if (d(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(i)]) != 0.0) {
      throw ContractViolation("distance-like function is nonzero on the diagonal");
    }
  }
  return model;
}

CostModel trivial_cost_model(std::size_t n) {
  const auto m = static_cast<Eigen::Index>(n);
  CostModel model;
  model.kind = DistanceKind::trivial;
  model.is_metric = true;
  model.cost = Matrix::Ones(m, m) - Matrix::Identity(m, m);
  model.weight = Vector::Ones(m);
  return model;
}

double lipschitz_constant(const Vector& f, const Matrix& cost) {
  double best = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) best = std::max(best, std::abs(f(i) - f(j)) / cost(i, j));
  return best;
}

bool is_lipschitz_one(const Vector& psi, const Matrix& cost) {
  for (Eigen::Index i = 0; i < psi.size(); ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      if (std::abs(psi(i) - psi(j)) > cost(i, j) + tol::lipschitz * (1.0 + cost(i, j)))
        return false;
  return true;
}

Matrix path_closure(const Matrix& cost) {
  Matrix d = cost;
  const Eigen::Index n = d.rows();
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) d(i, j) = std::min(d(i, j), d(i, k) + d(k, j));
  return d;
}

Vector mcshane_extension(const Vector& seed, const Matrix& cost) {
  Vector psi(seed.size());
  for (Eigen::Index u = 0; u < seed.size(); ++u) psi(u) = (seed.transpose() + cost.row(u)).minCoeff();
  return psi;
}

std::vector<Vector> sample_lipschitz_functions(const Matrix& cost, std::size_t count,
                                               std::uint64_t seed) {
  const Eigen::Index n = cost.rows();
  if (n == 0) throw DomainError("sample_lipschitz_functions requires a nonempty support");
  Rng rng(seed);
  const double scale = std::max(cost.maxCoeff(), 1.0);
  Matrix closure;
  std::vector<Vector> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Vector g(n);
    // Alternate dense seeds with sparse two-level seeds; the latter produce
    // indicator-like functions that are sharp for the trivial metric.
    if (k % 2 == 0) {
      for (Eigen::Index i = 0; i < n; ++i) g(i) = scale * uniform01(rng);
    } else {
      for (Eigen::Index i = 0; i < n; ++i) g(i) = uniform01(rng) < 0.5 ? 0.0 : 2.0 * scale;
    }
    Vector psi = mcshane_extension(g, cost);
    if (!is_lipschitz_one(psi, cost)) {
      if (closure.size() == 0) closure = path_closure(cost);
      psi = mcshane_extension(g, closure);
      if (!is_lipschitz_one(psi, cost)) {
        throw NumericalError("McShane extension failed the Lipschitz check");
      }
    }
    out.push_back(std::move(psi));
  }
  return out;
}

std::vector<Vector> sample_lipschitz_functions(const DistanceLike& d,
                                               std::span<const AugmentedState> support,
                                               std::size_t count, std::uint64_t seed) {
  if (support.empty()) throw DomainError("sample_lipschitz_functions requires a nonempty support");
  return sample_lipschitz_functions(make_cost_model(d, support).cost, count, seed);
}

void LyapunovSpec::validate() const {
  if (V.size() == 0) throw DomainError("Lyapunov function is empty");
  if (!(V.array() >= 1.0).all()) throw ContractViolation("Lyapunov function must satisfy V >= 1");
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("kappa must lie in (0, 1)");
  if (!(b >= 0.0)) throw DomainError("b must be nonnegative");
}

}  // namespace air
