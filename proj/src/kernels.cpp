#include "air/kernels.hpp"

#include "air/analysis.hpp"
#include "air/errors.hpp"
#include "air/log.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace air {

ParameterBox ParameterBox::interval(double lo, double hi) {
  if (!(lo <= hi)) throw DomainError("parameter interval requires lo <= hi");
  ParameterBox b;
  b.kind = Kind::interval;
  b.lo = lo;
  b.hi = hi;
  return b;
}

ParameterBox ParameterBox::eigen_box(std::size_t dim, double a1, double a2) {
  if (!(a1 > 0.0 && a1 <= a2)) throw DomainError("eigenvalue box requires 0 < a1 <= a2");
  ParameterBox b;
  b.kind = Kind::eigen_box;
  b.lo = a1;
  b.hi = a2;
  b.dim = dim;
  return b;
}

ParameterBox ParameterBox::finite_index(std::size_t count) {
  if (count == 0) throw DomainError("finite parameter set must be nonempty");
  ParameterBox b;
  b.kind = Kind::finite_index;
  b.lo = 0.0;
  b.hi = static_cast<double>(count - 1);
  b.count = count;
  return b;
}

namespace {

Matrix as_square(const Parameter& p, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (p.size() != d * d) throw DomainError("matrix parameter has the wrong size");
  return Eigen::Map<const Matrix>(p.data(), d, d);
}

}  // namespace

bool ParameterBox::contains(const Parameter& p, double slack) const {
  switch (kind) {
    case Kind::interval:
      return (p.array() >= lo - slack).all() && (p.array() <= hi + slack).all();
    case Kind::finite_index:
      return p.size() == 1 && p(0) >= 0.0 && p(0) <= hi && std::nearbyint(p(0)) == p(0);
    case Kind::eigen_box: {
      if (p.size() == 1) return p(0) >= lo - slack && p(0) <= hi + slack;
      const Matrix m = as_square(p, dim);
      if (!m.isApprox(m.transpose())) return false;
      const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(m).eigenvalues();
      return ev.minCoeff() >= lo * (1 - slack) && ev.maxCoeff() <= hi * (1 + slack);
    }
  }
  return false;
}

Parameter ParameterBox::project(const Parameter& p) const {
  switch (kind) {
    case Kind::interval:
      return p.cwiseMax(lo).cwiseMin(hi);
    case Kind::finite_index:
      return scalar_parameter(std::clamp(std::nearbyint(p(0)), 0.0, hi));
    case Kind::eigen_box: {
      if (p.size() == 1) return scalar_parameter(std::clamp(p(0), lo, hi));
      Matrix m = as_square(p, dim);
      m = 0.5 * (m + m.transpose());
      Eigen::SelfAdjointEigenSolver<Matrix> es(m);
      const Vector ev = es.eigenvalues().cwiseMax(lo).cwiseMin(hi);
      const Matrix clipped = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
      return Eigen::Map<const Parameter>(clipped.data(), clipped.size());
    }
  }
  return p;
}

void check_stochastic(const Matrix& P) {
  if (P.rows() != P.cols() || P.rows() == 0) throw DomainError("transition matrix must be square");
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    if (!(P.row(i).array() >= 0.0).all() || !P.row(i).allFinite()) {
      throw ContractViolation("transition matrix row " + std::to_string(i) +
                              " has a negative or non-finite entry");
    }
    if (std::abs(P.row(i).sum() - 1.0) > tol::row_sum) {
      throw ContractViolation("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

bool is_primitive(const Matrix& P) {
  const Eigen::Index n = P.rows();
  using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const Pattern step = (P.array() > 0.0).cast<int>().matrix();
  Pattern reach = step;
  const long bound = (n - 1) * (n - 1) + 1;
  for (long k = 1; k < bound; ++k) {
    if ((reach.array() > 0).all()) return true;
    reach = ((reach * step).array() > 0).cast<int>().matrix();
  }
  return (reach.array() > 0).all();
}

Matrix two_state_matrix(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("two-state gamma must lie in (0, 1)");
  Matrix P(2, 2);
  P << 1.0 - gamma, gamma, gamma, 1.0 - gamma;
  return P;
}

Matrix metropolis_matrix(const Matrix& proposal, const Vector& target) {
  check_stochastic(proposal);
  if (target.size() != proposal.rows()) throw DomainError("target size does not match proposal");
  if (!(target.array() > 0.0).all()) throw DomainError("Metropolis target must be strictly positive");
  const Eigen::Index n = proposal.rows();
  Matrix P = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j || proposal(i, j) == 0.0) continue;
      const double forward = target(i) * proposal(i, j);
      const double backward = target(j) * proposal(j, i);
      P(i, j) = proposal(i, j) * std::min(1.0, backward / forward);
      off += P(i, j);
    }
    P(i, i) = 1.0 - off;
  }
  return P;
}

FiniteKernelFamily::FiniteKernelFamily(std::string name, std::size_t states, ParameterBox box,
                                       MatrixFn matrix, std::optional<InvariantFn> invariant,
                                       AssumptionFlags flags)
    : name_(std::move(name)),
      states_(states),
      box_(box),
      matrix_(std::move(matrix)),
      invariant_(std::move(invariant)),
      flags_(flags) {
  if (states_ == 0) throw DomainError("kernel family needs at least one state");
}

Matrix FiniteKernelFamily::matrix(const Parameter& gamma) const {
  Matrix P = matrix_(gamma);
  if (static_cast<std::size_t>(P.rows()) != states_) throw DomainError("kernel has wrong size");
  check_stochastic(P);
  return P;
}

Vector FiniteKernelFamily::invariant(const Parameter& gamma) const {
  if (invariant_) return (*invariant_)(gamma);
  return stationary_law(matrix(gamma));
}

std::vector<Parameter> FiniteKernelFamily::parameter_grid(std::size_t grid) const {
  std::vector<Parameter> out;
  if (box_.kind == ParameterBox::Kind::finite_index) {
    for (std::size_t k = 0; k < box_.count; ++k) out.push_back(scalar_parameter(static_cast<double>(k)));
    return out;
  }
  for (std::size_t k = 1; k <= grid; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(grid + 1);
    out.push_back(scalar_parameter(box_.lo + t * (box_.hi - box_.lo)));
  }
  return out;
}

FiniteKernelFamily two_state_family() {
  const double eps = 1e-12;
  return FiniteKernelFamily(
      "two_state", 2, ParameterBox::interval(eps, 1.0 - eps),
      [](const Parameter& g) { return two_state_matrix(g(0)); },
      [](const Parameter&) { return Vector::Constant(2, 0.5); }, AssumptionFlags{});
}

FiniteKernelFamily doeblin_family(std::vector<Matrix> base, double alpha, Vector eta) {
  if (base.empty()) throw DomainError("doeblin_family needs at least one base matrix");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in (0, 1]");
  const Eigen::Index n = base.front().rows();
  if (eta.size() != n) throw DomainError("anchor law size does not match base matrices");
  if (!(eta.array() >= 0.0).all() || std::abs(eta.sum() - 1.0) > tol::probability_sum) {
    throw DomainError("anchor law must be a probability vector");
  }
  std::vector<Matrix> members;
  for (const Matrix& Q : base) {
    if (Q.rows() != n || Q.cols() != n) throw DomainError("base matrices must share one shape");
    check_stochastic(Q);
    members.push_back((1.0 - alpha) * Q + alpha * Vector::Ones(n) * eta.transpose());
  }
  AssumptionFlags flags;
  flags.uniform_ergodicity = true;
  flags.lambda = 1.0;
  flags.tau = 1.0 - alpha;
  FiniteKernelFamily fam = matrix_family(std::move(members), "doeblin");
  return FiniteKernelFamily(
      "doeblin", static_cast<std::size_t>(n), fam.box(),
      [fam](const Parameter& g) { return fam.matrix(g); }, std::nullopt, flags);
}

FiniteKernelFamily matrix_family(std::vector<Matrix> members, std::string name) {
  if (members.empty()) throw DomainError("matrix family needs at least one member");
  const Eigen::Index n = members.front().rows();
  for (const Matrix& P : members) {
    if (P.rows() != n || P.cols() != n) throw DomainError("family members must share one shape");
    check_stochastic(P);
    if (!is_primitive(P)) warn("kernel is not primitive; irreducibility/aperiodicity not verified");
  }
  const auto count = members.size();
  auto shared = std::make_shared<const std::vector<Matrix>>(std::move(members));
  return FiniteKernelFamily(
      std::move(name), static_cast<std::size_t>(n), ParameterBox::finite_index(count),
      [shared](const Parameter& g) {
        const double k = g(0);
        if (!(k >= 0.0) || k >= static_cast<double>(shared->size()) || std::nearbyint(k) != k) {
          throw DomainError("parameter is not a member index");
        }
        return (*shared)[static_cast<std::size_t>(k)];
      },
      std::nullopt, AssumptionFlags{});
}

RowSampler::RowSampler(const Matrix& P) : cdf_(P.rows(), P.cols()) {
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      acc += P(i, j);
      cdf_(i, j) = acc;
    }
    // The last positive entry absorbs rounding so u < cdf always terminates.
    for (Eigen::Index j = P.cols() - 1; j >= 0; --j) {
      cdf_(i, j) = 2.0;
      if (P(i, j) > 0.0) break;
    }
  }
}

std::size_t RowSampler::operator()(std::size_t from, Rng& rng) const {
  const double u = uniform01(rng);
  const auto i = static_cast<Eigen::Index>(from);
  Eigen::Index j = 0;
  while (u >= cdf_(i, j)) ++j;
  return static_cast<std::size_t>(j);
}

Matrix proposal_covariance(const Parameter& gamma, std::size_t dim) {
  const auto d = static_cast<Eigen::Index>(dim);
  if (gamma.size() == 1) return gamma(0) * Matrix::Identity(d, d);
  if (gamma.size() != d * d) throw DomainError("RWM parameter has the wrong size");
  return Eigen::Map<const Matrix>(gamma.data(), d, d);
}

RwmResult rwm_step_factored(const Vector& x, double log_px, const Matrix& chol,
                            const LogDensity& log_density, Rng& rng, double* log_pnew) {
  Vector xi(x.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi(i) = standard_normal(rng);
  Vector proposal = x + chol * xi;
  double log_py = log_density(proposal);
  if (std::isnan(log_py)) log_py = -std::numeric_limits<double>::infinity();
  const double log_ratio = log_py - log_px;
  const double u = uniform01(rng);
  if (log_ratio >= 0.0 || (std::isfinite(log_py) && u < std::exp(log_ratio))) {
    if (log_pnew) *log_pnew = log_py;
    return {std::move(proposal), true};
  }
  if (log_pnew) *log_pnew = log_px;
  return {x, false};
}

RwmResult rwm_step(const Vector& x, const Parameter& gamma, const LogDensity& log_density,
                   Rng& rng, const ParameterBox& box, bool* clamped) {
  const double log_px = log_density(x);
  if (!std::isfinite(log_px)) throw DomainError("target log-density is not finite at the current state");
  Parameter g = gamma;
  const bool inside = box.contains(gamma);
  if (!inside) {
    g = box.project(gamma);
    warn("RWM parameter outside the parameter box; projected back");
  }
  if (clamped) *clamped = !inside;
  const Matrix cov = proposal_covariance(g, static_cast<std::size_t>(x.size()));
  Eigen::LLT<Matrix> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("proposal covariance is not positive definite");
  return rwm_step_factored(x, log_px, llt.matrixL(), log_density, rng, nullptr);
}

std::vector<Matrix> read_matrices(std::istream& in) {
  std::vector<Matrix> out;
  std::vector<std::vector<double>> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = static_cast<Eigen::Index>(rows.front().size());
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != c) {
        throw DomainError("matrix rows have different lengths");
      }
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    out.push_back(std::move(m));
    rows.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line.compare(first, 3, "---") == 0) {
      flush();
      continue;
    }
    std::istringstream fields(line);
    std::vector<double> row;
    std::string token;
    while (fields >> token) {
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(token, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != token.size()) throw DomainError("not a decimal number: '" + token + "'");
      row.push_back(value);
    }
    rows.push_back(std::move(row));
  }
  flush();
  return out;
}

std::vector<Matrix> read_matrices_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open matrix file " + path);
  return read_matrices(in);
}

void write_matrix(std::ostream& out, const Matrix& P) {
  const auto old = out.precision(17);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) out << (j ? " " : "") << P(i, j);
    out << '\n';
  }
  out.precision(old);
}

}  // namespace air
