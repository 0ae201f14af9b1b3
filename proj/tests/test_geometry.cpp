#include "air/errors.hpp"
#include "air/geometry.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace air;

namespace {

StateFunction V_table(std::initializer_list<double> v) {
  Vector t(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) t(i++) = x;
  return table_function(t);
}

}  // namespace

TEST_CASE("distance values") {
  const auto y1 = AugmentedState::finite(0);
  const auto y2 = AugmentedState::finite(1);
  const auto d = DistanceLike::trivial();
  CHECK(d(y1, y1) == 0.0);
  CHECK(d(y1, y2) == 1.0);

  const auto dq = DistanceLike::v_weighted(V_table({4.0, 9.0}), 0.5);
  CHECK(dq(y1, y2) == doctest::Approx(5.0));
  CHECK(dq(y2, y2) == 0.0);

  const auto wh = DistanceLike::weak_harris(DistanceLike::trivial(), V_table({1.0, 1.0}), 0.7);
  CHECK(wh(y1, y2) == doctest::Approx(std::sqrt(3.0)));
  CHECK(wh(y1, y1) == 0.0);
}

TEST_CASE("augmented states compare by both components") {
  CHECK(AugmentedState::finite(1, 0) == AugmentedState::finite(1, 0));
  CHECK_FALSE(AugmentedState::finite(1, 0) == AugmentedState::finite(1, 1));
  Vector a(2);
  a << 0.5, 1.0;
  CHECK(AugmentedState::real(a) == AugmentedState::real(a));
  CHECK(DistanceLike::trivial()(AugmentedState::finite(2, 0), AugmentedState::finite(2, 1)) == 1.0);
  const auto support = finite_support(3, 2);
  CHECK(support.size() == 6);
  CHECK(support[3].label() == 1);
  CHECK(support[3].phi == 1);
}

TEST_CASE("Lyapunov weight below one is rejected") {
  const auto dq = DistanceLike::v_weighted(V_table({0.5, 2.0}), 1.0);
  CHECK_THROWS(dq(AugmentedState::finite(0), AugmentedState::finite(1)));
}

TEST_CASE("cost model properties") {
  const auto support = finite_support(4);
  Rng rng(3);
  Vector V(4);
  for (int i = 0; i < 4; ++i) V(i) = 1.0 + 5.0 * uniform01(rng);
  for (const DistanceLike& d : {DistanceLike::trivial(), DistanceLike::v_weighted(table_function(V), 0.5),
                                DistanceLike::weak_harris(DistanceLike::trivial(), table_function(V), 0.5)}) {
    const CostModel m = make_cost_model(d, support);
    CHECK((m.cost - m.cost.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(m.cost.diagonal().cwiseAbs().maxCoeff() == 0.0);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        if (i != j) CHECK(m.cost(i, j) > 0.0);
      }
    }
  }
}

TEST_CASE("McShane probes") {
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  Vector g(2);
  g << 0, 5;
  const Vector psi = mcshane_extension(g, c);
  CHECK(psi(0) == doctest::Approx(0.0));
  CHECK(psi(1) == doctest::Approx(1.0));

  const Vector constant = Vector::Constant(2, 3.0);
  CHECK((mcshane_extension(constant, c).array() == 3.0).all());

  const Matrix triv = Matrix::Ones(5, 5) - Matrix::Identity(5, 5);
  for (const Vector& p : sample_lipschitz_functions(triv, 50, 9)) {
    CHECK(p.maxCoeff() - p.minCoeff() <= 1.0 + 1e-12);
    CHECK(is_lipschitz_one(p, triv));
  }
}

TEST_CASE("probes stay Lipschitz for non-metric costs") {
  // d_q for q = 1 with unequal weights violates the triangle inequality.
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 2 + static_cast<int>(uniform01(rng) * 6);
    Vector V(n);
    for (int i = 0; i < n; ++i) V(i) = 1.0 + 20.0 * uniform01(rng);
    const auto d = DistanceLike::weak_harris(DistanceLike::trivial(), table_function(V), 1.0);
    const auto support = finite_support(static_cast<std::size_t>(n));
    const CostModel m = make_cost_model(d, support);
    for (const Vector& p : sample_lipschitz_functions(d, support, 20, static_cast<std::uint64_t>(rep))) {
      CHECK(is_lipschitz_one(p, m.cost));
    }
  }
}

TEST_CASE("path closure is the largest metric below the cost") {
  Matrix c(3, 3);
  c << 0, 1, 5, 1, 0, 1, 5, 1, 0;
  const Matrix pc = path_closure(c);
  CHECK(pc(0, 2) == doctest::Approx(2.0));
  CHECK(pc(0, 1) == doctest::Approx(1.0));
  CHECK((pc.array() <= c.array()).all());
}

TEST_CASE("Lipschitz constant") {
  const Matrix triv = Matrix::Ones(3, 3) - Matrix::Identity(3, 3);
  Vector f(3);
  f << 0.0, 2.0, -1.0;
  CHECK(lipschitz_constant(f, triv) == doctest::Approx(3.0));
  CHECK(lipschitz_constant(Vector::Constant(3, 4.0), triv) == 0.0);
}

TEST_CASE("Lyapunov drift data validation") {
  LyapunovSpec s;
  s.V = Vector::Ones(2);
  s.kappa = 0.5;
  s.b = 0.5;
  CHECK_NOTHROW(s.validate());
  s.kappa = 1.0;
  CHECK_THROWS(s.validate());
  s.kappa = 0.5;
  s.V(0) = 0.5;
  CHECK_THROWS(s.validate());
}
