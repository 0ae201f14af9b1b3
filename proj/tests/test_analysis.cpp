#include "air/analysis.hpp"
#include "air/errors.hpp"
#include "air/kernels.hpp"
#include "air/log.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <string>

using namespace air;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("stationary law") {
  for (double g : {0.01, 0.25, 0.5, 0.99}) {
    const Vector pi = stationary_law(two_state_matrix(g));
    CHECK(pi(0) == doctest::Approx(0.5));
    CHECK(pi(1) == doctest::Approx(0.5));
  }
  Rng rng(21);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix base = oracle::random_kernel(5, rng);
    const Vector eta = oracle::random_probability(5, rng);
    const Matrix P = 0.5 * base + 0.5 * Vector::Ones(5) * eta.transpose();
    const Vector pi = stationary_law(P);
    CHECK((pi - oracle::stationary_by_iteration(P)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((P.transpose() * pi - pi).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("reducible kernels") {
  std::vector<std::string> warnings;
  auto previous = set_warning_handler([&](std::string_view w) { warnings.emplace_back(w); });
  CHECK_THROWS_AS(stationary_law(Matrix::Identity(3, 3)), NumericalError);
  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  const Vector pi = stationary_law(flip);
  CHECK(pi(0) == doctest::Approx(0.5));
  CHECK_FALSE(warnings.empty());
  set_warning_handler(previous);
}

TEST_CASE("total variation") {
  CHECK(total_variation(vec({0.3, 0.7}), vec({0.3, 0.7})) == 0.0);
  CHECK(total_variation(vec({1, 0, 0}), vec({0, 0, 1})) == 1.0);
  CHECK(total_variation(vec({0.7, 0.3}), vec({0.5, 0.5})) == doctest::Approx(0.2));
}

TEST_CASE("exact Wasserstein") {
  const auto support = finite_support(2);
  const Vector d1 = vec({1, 0}), d2 = vec({0, 1});
  CHECK(wasserstein_exact(DistanceLike::trivial(), d1, d1, support) == 0.0);
  CHECK(wasserstein_exact(DistanceLike::trivial(), d1, d2, support) == doctest::Approx(1.0));
  const auto dq = DistanceLike::v_weighted(table_function(vec({4, 9})), 0.5);
  CHECK(wasserstein_exact(dq, d1, d2, support) == doctest::Approx(5.0));

  Rng rng(8);
  for (int rep = 0; rep < 100; ++rep) {
    const auto n = static_cast<std::size_t>(2 + uniform01(rng) * 3);
    Matrix c(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      c(i, i) = 0.0;
      for (std::size_t j = 0; j < i; ++j) c(i, j) = c(j, i) = 0.1 + uniform01(rng);
    }
    CostModel m;
    m.cost = c;
    m.weight = Vector::Ones(static_cast<Eigen::Index>(n));
    const Vector a = oracle::random_probability(n, rng, 0.2);
    const Vector b = oracle::random_probability(n, rng, 0.2);
    CHECK(wasserstein_exact(m, a, b) == doctest::Approx(oracle::transport_by_enumeration(a, b, c)).epsilon(1e-10));
  }
}

TEST_CASE("contraction coefficient") {
  const CostModel triv = trivial_cost_model(2);
  for (double g : {0.1, 0.25, 0.6}) {
    CHECK(contraction_coefficient(two_state_matrix(g), triv, 1).tau_ell == doctest::Approx(std::abs(1 - 2 * g)));
  }
  CHECK(contraction_coefficient(two_state_matrix(0.25), triv, 2).tau_ell == doctest::Approx(0.25));

  const auto support = finite_support(3);
  const auto dq = DistanceLike::v_weighted(table_function(vec({1, 2, 5})), 0.5);
  CHECK(contraction_coefficient(Matrix::Identity(3, 3), dq, 1, support).tau_ell == doctest::Approx(1.0));
  CHECK(contraction_coefficient(Matrix::Identity(3, 3), trivial_cost_model(3), 1).tau_ell == doctest::Approx(1.0));

  Rng rng(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix P = oracle::random_kernel(4, rng);
    CHECK(contraction_coefficient(P, trivial_cost_model(4), 1).tau_ell == doctest::Approx(tv_contraction(P)));
  }
}

TEST_CASE("contraction constants over a family") {
  std::vector<Matrix> members{two_state_matrix(0.25), two_state_matrix(0.4)};
  const ContractionReport r = contraction_constants(members, trivial_cost_model(2));
  CHECK(r.k0 == 1);
  CHECK(r.tau == doctest::Approx(0.5));
  CHECK(r.M == doctest::Approx(1.0));
  std::vector<Matrix> stuck{Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(contraction_constants(stuck, trivial_cost_model(2), 8), NumericalError);
}

TEST_CASE("eccentricity") {
  const Vector pi = vec({0.2, 0.3, 0.5});
  const CostModel triv = trivial_cost_model(3);
  for (std::size_t y = 0; y < 3; ++y) CHECK(eccentricity(triv, pi, y) == doctest::Approx(1 - pi(y)));
  CHECK(eccentricity(trivial_cost_model(2), vec({0.5, 0.5}), 0) == doctest::Approx(0.5));
  const auto support = finite_support(3);
  const auto dq = DistanceLike::v_weighted(table_function(Vector::Ones(3)), 0.7);
  for (std::size_t y = 0; y < 3; ++y) {
    CHECK(eccentricity(dq, pi, AugmentedState::finite(y), support) == doctest::Approx(2 * (1 - pi(y))));
  }
}

TEST_CASE("Poisson solutions") {
  const PoissonSolution s = poisson_solve(two_state_matrix(0.25), vec({1, 0}));
  CHECK(s.u(0) == doctest::Approx(1.0));
  CHECK(s.u(1) == doctest::Approx(-1.0));
  CHECK(s.residual <= 1e-10);
  for (double g : {0.1, 0.3, 0.7}) {
    const PoissonSolution t = poisson_solve(two_state_matrix(g), vec({1, 0}));
    CHECK(t.u(0) == doctest::Approx(1 / (4 * g)));
  }

  const PoissonSolution c = poisson_solve(two_state_matrix(0.3), vec({2, 2}));
  CHECK(c.u.cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(17);
  for (int rep = 0; rep < 50; ++rep) {
    const Matrix base = oracle::random_kernel(6, rng);
    const Vector eta = oracle::random_probability(6, rng);
    const Matrix P = 0.6 * base + 0.4 * Vector::Ones(6) * eta.transpose();
    Vector f(6);
    for (int i = 0; i < 6; ++i) f(i) = 4 * uniform01(rng) - 2;
    const PoissonSolution p = poisson_solve(P, f);
    CHECK(p.residual <= 1e-10);
    CHECK(p.series_checked);
    CHECK(p.series_agreement <= 1e-8);
    CHECK((p.u - oracle::poisson_by_series(P, f, oracle::stationary_by_iteration(P))).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(p.pi.dot(p.u)) < 1e-12);
  }
}

TEST_CASE("Poisson bound") {
  const Matrix P = two_state_matrix(0.25);
  const CostModel triv = trivial_cost_model(2);
  const PoissonSolution s = poisson_solve(P, vec({1, 0}));
  const ContractionReport r = contraction_coefficient(P, triv, 1);
  PoissonBoundAudit a = poisson_bound_check(s, triv, 1.0, r);
  CHECK(a.ok);
  CHECK(a.bound(0) == doctest::Approx(1.0));
  CHECK(std::abs(a.min_slack) < 1e-10);

  const PoissonSolution c = poisson_solve(P, vec({3, 3}));
  a = poisson_bound_check(c, triv, 0.0, r);
  CHECK(a.ok);
  CHECK((a.slack - a.bound).cwiseAbs().maxCoeff() < 1e-14);

  Rng rng(99);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = static_cast<std::size_t>(2 + uniform01(rng) * 6);
    const Matrix base = oracle::random_kernel(n, rng);
    const Vector eta = oracle::random_probability(n, rng);
    const double alpha = 0.1 + 0.9 * uniform01(rng);
    const Matrix Q = (1 - alpha) * base + alpha * Vector::Ones(static_cast<Eigen::Index>(n)) * eta.transpose();
    Vector f(static_cast<Eigen::Index>(n));
    for (auto& v : f) v = uniform01(rng);
    const CostModel m = trivial_cost_model(n);
    const std::vector<Matrix> one{Q};
    const ContractionReport cr = contraction_constants(one, m);
    const PoissonSolution ps = poisson_solve(Q, f);
    CHECK(poisson_bound_check(ps, m, lipschitz_constant(f, m.cost), cr).ok);
  }
}

TEST_CASE("duality gap") {
  const CostModel triv = trivial_cost_model(2);
  const Vector a = vec({1, 0}), b = vec({0, 1});
  DualityGap g = duality_gap(triv, a, a, 10, 1);
  CHECK(g.lower == 0.0);
  CHECK(g.exact == 0.0);
  const std::vector<Vector> witness{vec({1, 0})};
  g = duality_gap(triv, a, b, 0, 1, witness);
  CHECK(g.lower == doctest::Approx(1.0));
  CHECK(g.exact == doctest::Approx(1.0));

  Rng rng(31);
  for (int rep = 0; rep < 1000; ++rep) {
    const auto n = static_cast<std::size_t>(2 + uniform01(rng) * 5);
    Vector V(static_cast<Eigen::Index>(n));
    for (auto& v : V) v = 1 + 9 * uniform01(rng);
    const auto support = finite_support(n);
    const CostModel m = make_cost_model(DistanceLike::v_weighted(table_function(V), 0.5), support);
    const Vector mu1 = oracle::random_probability(n, rng, 0.2);
    const Vector mu2 = oracle::random_probability(n, rng, 0.2);
    const DualityGap d = duality_gap(m, mu1, mu2, 8, static_cast<std::uint64_t>(rep));
    CHECK(d.inequality_holds);
    CHECK(d.lower <= d.exact + 1e-12);
  }
}

TEST_CASE("indicator probes") {
  CHECK(indicator_probes(3).size() == 8);
  CHECK_THROWS(indicator_probes(21));
}

TEST_CASE("Lyapunov audit") {
  // q = 1 reduces to the drift inequality itself.
  const Matrix P = two_state_matrix(0.25);
  LyapunovSpec s;
  s.V = vec({1, 2});
  const Vector PV = P * s.V;
  s.kappa = 0.5;
  s.b = (PV - s.kappa * s.V).maxCoeff();
  const std::vector<double> q_one{1.0};
  LyapunovAudit a = lyapunov_audit(P, s, q_one);
  CHECK(a.ok);
  CHECK(a.worst_slack[0] == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> qs{0.25, 0.5, 0.75};
  a = lyapunov_audit(P, s, qs);
  CHECK(a.ok);
  CHECK(a.pi_V <= a.pi_V_bound);

  LyapunovSpec flat;
  flat.V = Vector::Ones(2);
  flat.kappa = 0.3;
  flat.b = 0.7;
  a = lyapunov_audit(P, flat, qs);
  CHECK(a.ok);
  CHECK(a.pi_V == doctest::Approx(a.pi_V_bound));

  s.b = 0.0;
  CHECK_THROWS_AS(lyapunov_audit(P, s, qs), AuditFailure);
}

TEST_CASE("minorisation audit") {
  const std::vector<std::size_t> both{0, 1};
  MinorisationAudit m = minorisation_audit(two_state_matrix(0.25), both, 0.5);
  CHECK(m.ok);
  CHECK(m.mass == doctest::Approx(0.5));
  CHECK(m.eta(0) == doctest::Approx(0.5));
  CHECK_FALSE(minorisation_audit(two_state_matrix(0.25), both, 0.51).ok);

  Rng rng(3);
  const Vector eta = oracle::random_probability(4, rng);
  const Matrix Q = 0.7 * oracle::random_kernel(4, rng) + 0.3 * Vector::Ones(4) * eta.transpose();
  const std::vector<std::size_t> all{0, 1, 2, 3};
  CHECK(minorisation_audit(Q, all, 0.3 - 1e-12).ok);

  Matrix D(2, 2);
  D << 1, 0, 0, 1;
  CHECK_FALSE(minorisation_audit(D, both, 1e-6).ok);
}
