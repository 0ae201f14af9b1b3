#include "air/analysis.hpp"
#include "air/errors.hpp"
#include "air/kernels.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <sstream>

using namespace air;

TEST_CASE("two-state matrices") {
  Matrix P = two_state_matrix(0.5);
  CHECK((P.array() == 0.5).all());
  P = two_state_matrix(0.25);
  CHECK(P(0, 0) == 0.75);
  CHECK(P(0, 1) == 0.25);
  CHECK(P(1, 0) == 0.25);
  CHECK(P(1, 1) == 0.75);
  const FiniteKernelFamily fam = two_state_family();
  for (double g : {0.05, 0.3, 0.9}) {
    const Vector pi = fam.invariant(scalar_parameter(g));
    CHECK(pi(0) == 0.5);
    CHECK(pi(1) == 0.5);
  }
  CHECK_THROWS(two_state_matrix(0.0));
  CHECK_THROWS(two_state_matrix(1.0));
}

TEST_CASE("Doeblin family") {
  Vector eta(2);
  eta << 0.5, 0.5;
  const FiniteKernelFamily fam = doeblin_family({Matrix::Identity(2, 2)}, 0.5, eta);
  const Matrix P = fam.matrix(scalar_parameter(0.0));
  CHECK(P(0, 0) == doctest::Approx(0.75));
  CHECK(P(0, 1) == doctest::Approx(0.25));
  CHECK(tv_contraction(P) == doctest::Approx(0.5));
  CHECK(fam.flags().uniform_ergodicity);
  CHECK(fam.flags().tau == doctest::Approx(0.5));

  Rng rng(7);
  std::vector<Matrix> base;
  for (int i = 0; i < 3; ++i) base.push_back(oracle::random_kernel(5, rng));
  const Vector eta5 = oracle::random_probability(5, rng);
  const FiniteKernelFamily iid = doeblin_family(base, 1.0, eta5);
  for (const Parameter& g : iid.parameter_grid()) {
    const Matrix Q = iid.matrix(g);
    for (int i = 0; i < 5; ++i) CHECK((Q.row(i).transpose() - eta5).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(tv_contraction(Q) < 1e-15);
  }
  const FiniteKernelFamily half = doeblin_family(base, 0.5, eta5);
  for (const Parameter& g : half.parameter_grid()) {
    const Matrix Q = half.matrix(g);
    const Vector pi = half.invariant(g);
    CHECK((Q.transpose() * pi - pi).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("kernel powers") {
  const Matrix P = two_state_matrix(0.25);
  CHECK((kernel_power(P, 1) - P).cwiseAbs().maxCoeff() == 0.0);
  CHECK(kernel_power(P, 2)(0, 0) == doctest::Approx(0.625));
  const Matrix big = kernel_power(P, 200);
  CHECK((big.array() - 0.5).abs().maxCoeff() < 1e-12);
  CHECK((kernel_power(P, 0) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(1);
  const Matrix Q = oracle::random_kernel(6, rng);
  Matrix naive = Matrix::Identity(6, 6);
  for (int i = 0; i < 13; ++i) naive = naive * Q;
  CHECK((kernel_power(Q, 13) - naive).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("stochasticity checks") {
  Matrix P(2, 2);
  P << 0.5, 0.5, 0.5, 0.6;
  CHECK_THROWS(check_stochastic(P));
  P << 1.1, -0.1, 0.5, 0.5;
  CHECK_THROWS(check_stochastic(P));
  CHECK_NOTHROW(check_stochastic(two_state_matrix(0.3)));
}

TEST_CASE("primitivity") {
  CHECK(is_primitive(two_state_matrix(0.3)));
  Matrix flip(2, 2);
  flip << 0, 1, 1, 0;
  CHECK_FALSE(is_primitive(flip));
  CHECK_FALSE(is_primitive(Matrix::Identity(3, 3)));
  Rng rng(2);
  CHECK(is_primitive(oracle::random_sparse_kernel(8, rng)));
}

TEST_CASE("Metropolis matrix is reversible") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix Q = oracle::random_dense_kernel(6, rng);
    const Vector pi = oracle::random_probability(6, rng);
    const Matrix P = metropolis_matrix(Q, pi);
    CHECK_NOTHROW(check_stochastic(P));
    const Matrix flow = pi.asDiagonal() * P;
    CHECK((flow - flow.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("row sampler frequencies") {
  Matrix Q(3, 3);
  Q << 0.2, 0.0, 0.8, 0.0, 1.0, 0.0, 0.3, 0.3, 0.4;
  const RowSampler sampler(Q);
  Rng rng(9);
  std::vector<int> counts(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++counts[sampler(0, rng)];
  CHECK(counts[1] == 0);
  CHECK(static_cast<double>(counts[0]) / n == doctest::Approx(0.2).epsilon(0.02));
  for (int i = 0; i < 1000; ++i) CHECK(sampler(1, rng) == 1);
}

TEST_CASE("random-walk Metropolis") {
  auto log_p = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  const ParameterBox box = ParameterBox::interval(0.01, 100.0);
  Rng rng(12);

  // From the mode of a symmetric unimodal target with a tiny step: nearly always accepted.
  int acc = 0;
  Vector x = Vector::Zero(1);
  for (int i = 0; i < 20000; ++i) {
    const RwmResult r = rwm_step(x, scalar_parameter(0.01), log_p, rng, box);
    acc += r.accepted;
    x = r.x;
  }
  CHECK(static_cast<double>(acc) / 20000 > 0.9);

  // 2.38^2 on a standard normal: long-run acceptance about 0.44.
  acc = 0;
  x = Vector::Zero(1);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const RwmResult r = rwm_step(x, scalar_parameter(2.38 * 2.38), log_p, rng, box);
    acc += r.accepted;
    x = r.x;
  }
  CHECK(static_cast<double>(acc) / n == doctest::Approx(0.44).epsilon(0.03 / 0.44));

  // Ratio >= 1 everywhere on a flat target: every proposal is accepted.
  auto flat = [](const Vector&) { return 0.0; };
  Vector y = Vector::Zero(1);
  for (int i = 0; i < 2000; ++i) {
    const RwmResult r = rwm_step(y, scalar_parameter(1.0), flat, rng, box);
    CHECK(r.accepted);
    y = r.x;
  }

  bool clamped = false;
  rwm_step(x, scalar_parameter(1000.0), log_p, rng, box, &clamped);
  CHECK(clamped);
}

TEST_CASE("parameter boxes project") {
  const ParameterBox iv = ParameterBox::interval(0.1, 0.9);
  CHECK(iv.project(scalar_parameter(2.0))(0) == 0.9);
  CHECK(iv.project(scalar_parameter(-1.0))(0) == 0.1);
  const ParameterBox eb = ParameterBox::eigen_box(2, 0.5, 2.0);
  Matrix S(2, 2);
  S << 10.0, 0.0, 0.0, 0.01;
  const Parameter p = eb.project(Eigen::Map<const Vector>(S.data(), 4));
  CHECK(p(0) == doctest::Approx(2.0));
  CHECK(p(3) == doctest::Approx(0.5));
  CHECK(eb.contains(p));
  const ParameterBox fi = ParameterBox::finite_index(3);
  CHECK(fi.project(scalar_parameter(7.0))(0) == 2.0);
  CHECK(fi.project(scalar_parameter(0.6))(0) == 1.0);
}

TEST_CASE("matrix file round trip") {
  std::stringstream ss;
  ss << "# two members\n0.5 0.5\n0.25 0.75\n---\n1 0\n0.5 0.5\n";
  const auto ms = read_matrices(ss);
  REQUIRE(ms.size() == 2);
  CHECK(ms[0](1, 1) == 0.75);
  CHECK(ms[1](1, 0) == 0.5);
  std::stringstream out;
  write_matrix(out, ms[0]);
  out << "\n";
  write_matrix(out, ms[1]);
  const auto back = read_matrices(out);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == ms[0]);
  CHECK(back[1] == ms[1]);
  std::stringstream bad("0.5 x\n");
  CHECK_THROWS(read_matrices(bad));
  std::stringstream ragged("0.5 0.5\n1\n");
  CHECK_THROWS(read_matrices(ragged));
}
