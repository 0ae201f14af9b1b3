#include "air/config.hpp"
#include "air/decomposition.hpp"
#include "air/errors.hpp"
#include "air/records.hpp"
#include "air/runner.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

using namespace air;

namespace {

RunConfig two_state_config() {
  RunConfig c;
  c.kernel.family = "two_state";
  c.adaptation.rule = "fixed_sequence";
  c.adaptation.values = {0.25, 0.4};
  c.adaptation.cyclic = true;
  c.beta = 1.0;
  c.y0 = {0};
  c.gamma0 = {0.25};
  c.horizon = 1000;
  return c;
}

RunConfig doeblin_config(double alpha) {
  RunConfig c;
  c.kernel.family = "doeblin";
  c.kernel.states = 5;
  c.kernel.alpha = alpha;
  c.kernel.members = 3;
  c.adaptation.rule = "fixed_sequence";
  c.adaptation.values = {0, 1, 2};
  c.adaptation.cyclic = true;
  c.gamma0 = {0};
  c.y0 = {0};
  c.beta = 1.0;
  c.horizon = 10000;
  return c;
}

RunConfig counterexample_config(std::uint64_t horizon, std::uint64_t R) {
  RunConfig c;
  c.kernel.family = "two_state";
  c.adaptation.rule = "counterexample";
  c.y0 = {1};
  c.integrand.values = {0, 1};
  c.horizon = horizon;
  c.replications = R;
  return c;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("rate values") {
  RateSpec poly{RateSpec::Kind::poly, 0.5, 2};
  CHECK(rate_value(16, poly) == doctest::Approx(16.0));
  RateSpec sl{RateSpec::Kind::sqrt_log, 0.5, 2};
  CHECK(rate_value(7, sl) == doctest::Approx(std::sqrt(7.0) * std::log(7.0)));
  CHECK(rate_value(8, sl) == doctest::Approx(std::sqrt(8.0) * std::log(8.0)));
  CHECK_THROWS_AS(rate_value(1, sl), DomainError);
  CHECK_THROWS_AS(rate_value(1, poly), DomainError);
  double prev = rate_value(3, sl);
  for (std::uint64_t n = 4; n <= 1'000'000; ++n) {
    const double r = rate_value(n, sl);
    if (r <= prev) {
      FAIL("sqrt_log not increasing at n=" << n);
      break;
    }
    prev = r;
  }
}

TEST_CASE("normalized sums") {
  const std::vector<double> constant(1000, 0.7);
  const RateDiagnostics d = normalized_sums(constant, 0.7, RateSpec{});
  CHECK(d.c_hat == 0.0);
  CHECK(d.tail_value == 0.0);
  for (double v : d.normalized) CHECK(v == 0.0);

  Rng rng(1);
  std::vector<double> xs;
  for (int i = 0; i < 5000; ++i) xs.push_back(uniform01(rng));
  const RateSpec spec{RateSpec::Kind::poly, 0.25, 2};
  const RateDiagnostics e = normalized_sums(xs, 0.5, spec);
  CHECK(e.c_hat >= std::abs(e.tail_value));
  REQUIRE(!e.checkpoints.empty());
  CHECK(e.checkpoints.front() == 2);
  CHECK(e.checkpoints.back() == 5000);
  for (std::size_t k = 1; k < e.checkpoints.size(); ++k) CHECK(e.checkpoints[k] > e.checkpoints[k - 1]);
  double s = 0.0, cmax = 0.0;
  for (std::size_t n = 1; n <= xs.size(); ++n) {
    s += xs[n - 1] - 0.5;
    if (n >= 2) cmax = std::max(cmax, std::abs(s) / rate_value(n, spec));
  }
  CHECK(e.c_hat == doctest::Approx(cmax).epsilon(1e-12));
  CHECK(e.tail_value == doctest::Approx(s / rate_value(5000, spec)).epsilon(1e-12));
  const std::size_t last = e.checkpoints.size() - 1;
  CHECK(e.bound_form[last] == doctest::Approx(e.c_hat * rate_value(5000, spec) / 5000));
}

TEST_CASE("geometric checkpoints") {
  const auto cps = geometric_checkpoints(2, 1000000);
  CHECK(cps.size() < 200);
  CHECK(cps.back() == 1000000);
  CHECK(std::adjacent_find(cps.begin(), cps.end()) == cps.end());
}

TEST_CASE("runs are deterministic and adapt only at adaptation times") {
  const RunConfig c = two_state_config();
  RunOptions o;
  o.record_trajectory = true;
  const RunResult a = run_air(c, 5, o);
  const RunResult b = run_air(c, 5, o);
  CHECK(a.trajectory->states == b.trajectory->states);
  CHECK(a.diagnostics.c_hat == b.diagnostics.c_hat);
  const RunResult other = run_air(c, 6, o);
  CHECK(a.trajectory->states != other.trajectory->states);

  const AirSchedule s(1.0);
  REQUIRE(a.windows.size() >= 2);
  for (std::size_t m = 0; m < a.windows.size(); ++m) {
    CHECK(a.windows[m].time == s.adaptation_time(m));
    CHECK(a.windows[m].parameter(0) == (m % 2 == 0 ? 0.25 : 0.4));
  }
  const auto& t = *a.trajectory;
  CHECK(t.states.size() == c.horizon + 1);
  for (std::size_t n = 1; n < t.param_ids.size(); ++n) {
    if (t.param_ids[n] != t.param_ids[n - 1]) CHECK(s.installed_window(n).start == n);
    CHECK(t.windows[n] == s.installed_window(n).m);
  }
}

TEST_CASE("recorded trajectories decompose exactly") {
  const RunConfig c = two_state_config();
  RunOptions o;
  o.record_trajectory = true;
  const RunResult r = run_air(c, 11, o);
  const FiniteTrajectory t = r.trajectory->finite();
  const ChainModel model = build_model(c);
  const auto& fm = std::get<FiniteModel>(model);
  ParameterModels models;
  for (std::size_t id = 0; id < r.trajectory->params.size(); ++id) {
    const Matrix P = fm.family->matrix(r.trajectory->params[id]);
    models[id] = ParameterModel{P, poisson_solve(P, fm.f)};
  }
  const DecompositionReport rep = decompose(t, fm.f, models, AirSchedule(1.0));
  CHECK(rep.identity_residual <= 1e-10);
  double sum = 0.0;
  for (std::size_t n = 1; n < t.states.size(); ++n) sum += fm.f(static_cast<Eigen::Index>(t.states[n])) - 0.5;
  CHECK(rep.lhs == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("full regeneration gives i.i.d. draws from the anchor") {
  RunConfig c = doeblin_config(1.0);
  c.horizon = 50000;
  RunOptions o;
  o.record_trajectory = true;
  const RunResult r = run_air(c, 3, o);
  Vector eta;
  build_doeblin(c.kernel, &eta);
  std::vector<double> counts(5, 0.0);
  for (std::size_t n = 1; n < r.trajectory->states.size(); ++n) counts[static_cast<std::size_t>(r.trajectory->states[n][0])] += 1;
  double chi2 = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double e = eta(i) * static_cast<double>(c.horizon);
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  CHECK(chi2 < 18.47);  // chi-square(4) at 0.999
}

TEST_CASE("i.i.d. baseline normalised values") {
  RunConfig c = doeblin_config(1.0);
  c.horizon = 1'000'000;
  c.replications = 200;
  c.rate = RateSpec{RateSpec::Kind::poly, 0.25, 2};
  c.threshold = 0.05;
  const Study s = replicate(c, 8);
  CHECK_FALSE(s.failed);
  CHECK(s.summary.fraction_below_threshold >= 0.95);
  CHECK_FALSE(s.summary.lln_failure);
}

TEST_CASE("counterexample stickiness") {
  const AirSchedule sched(1.0);
  for (std::uint64_t ell : {2u, 3u, 6u}) {
    const RunConfig c = counterexample_config(sched.adaptation_time(ell), 20000);
    const Study s = replicate(c, 4);
    const double p = counterexample_stay_probability(ell - 1);
    CHECK(s.summary.stay_probability == doctest::Approx(p).epsilon(1e-12));
    const double se = std::sqrt(p * (1 - p) / 20000.0);
    CHECK(std::abs(s.summary.stuck_fraction - p) <= 3 * se);
  }
  CHECK(counterexample_theta() == doctest::Approx(oracle::theta()).epsilon(1e-14));
}

TEST_CASE("counterexample flags LLN failure and stuck paths stay at f(1)") {
  const RunConfig c = counterexample_config(AirSchedule(1.0).adaptation_time(20), 2000);
  const Study s = replicate(c, 4);
  CHECK(s.summary.lln_failure);
  for (const auto& r : s.records) {
    if (r.stuck) CHECK(r.mean_f == 1.0);
  }
  RunConfig poly = c;
  poly.horizon = 5000;
  poly.rate = RateSpec{RateSpec::Kind::poly, 0.1, 2};
  poly.replications = 1;
  // A stuck path: S_n - n nu(f) = n/2 grows faster than n^{0.6}.
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RunOptions o;
    const RunResult r = run_air(poly, seed, o);
    if (!r.stayed_at_start) continue;
    CHECK(r.diagnostics.tail_value == doctest::Approx(2500.0 / std::pow(5000.0, 0.6)));
    CHECK(r.diagnostics.normalized.back() > r.diagnostics.normalized[r.diagnostics.normalized.size() / 2]);
    break;
  }
}

TEST_CASE("replication studies") {
  RunConfig c = doeblin_config(0.5);
  c.horizon = 5000;
  c.replications = 1;
  const Study one = replicate(c, 1);
  REQUIRE(one.records.size() == 1);
  const RunResult r = run_air(c, derive_seed(c.seed, 0));
  CHECK(one.records[0].c_hat == r.diagnostics.c_hat);
  CHECK(one.records[0].tail_value == r.diagnostics.tail_value);

  c.replications = 64;
  const Study a = replicate(c, 1);
  const Study b = replicate(c, 5);
  std::ostringstream sa, sb;
  write_study(sa, a);
  write_study(sb, b);
  CHECK(sa.str() == sb.str());

  c.replications = 300;
  RunConfig d = c;
  d.seed = 99;
  const Study x = replicate(c, 4), y = replicate(d, 4);
  std::vector<double> cx, cy;
  for (const auto& rec : x.records) cx.push_back(rec.c_hat);
  for (const auto& rec : y.records) cy.push_back(rec.c_hat);
  CHECK(cx != cy);
  CHECK(ks_statistic(cx, cy) < 1.95 * std::sqrt(2.0 / 300.0));
}

TEST_CASE("tail median decreases as the horizon doubles") {
  RunConfig c = doeblin_config(0.5);
  c.rate = RateSpec{RateSpec::Kind::poly, 0.25, 2};
  c.replications = 100;
  double previous = std::numeric_limits<double>::infinity();
  for (std::uint64_t N : {250000u, 500000u, 1000000u}) {
    c.horizon = N;
    const Study s = replicate(c, 8);
    CHECK(s.summary.abs_tail_median <= previous);
    previous = s.summary.abs_tail_median;
  }
}

TEST_CASE("acceptance targeting wanes on a Gaussian target") {
  RunConfig c;
  c.kernel.family = "rwm";
  c.adaptation.rule = "acceptance_targeting";
  c.beta = 1.0;
  c.y0 = {0.0};
  c.gamma0 = {0.5};
  c.horizon = 200000;
  c.integrand.power = 2;
  c.replications = 20;
  const Study s = replicate(c, 4);
  CHECK_FALSE(s.failed);
  CHECK(s.summary.nu_f == 1.0);
  CHECK(s.summary.waning_decreasing_fraction >= 0.8);
  for (const auto& r : s.records) CHECK(r.acceptance_rate == doctest::Approx(0.44).epsilon(0.1));
}

TEST_CASE("empirical moment rule on a two-dimensional Gaussian") {
  RunConfig c;
  c.kernel.family = "rwm";
  c.kernel.dim = 2;
  c.adaptation.rule = "empirical_moment";
  c.beta = 1.0;
  c.y0 = {0.0, 0.0};
  c.gamma0 = {1.0};
  c.horizon = 50000;
  const RunResult r = run_air(c, 2);
  const Parameter& g = r.windows.back().parameter;
  REQUIRE(g.size() == 4);
  CHECK(g(0) == doctest::Approx(2.38 * 2.38).epsilon(0.2));
  CHECK(std::abs(g(1)) < 1.0);
}

TEST_CASE("Gaussian mixture integrand is exact") {
  RunConfig c;
  c.kernel.family = "rwm";
  c.kernel.target = "gaussian_mixture";
  c.kernel.mixture_weights = {1.0, 3.0};
  c.kernel.mixture_means = {-2.0, 1.0};
  c.kernel.mixture_sds = {0.5, 1.0};
  c.adaptation.rule = "fixed_sequence";
  c.adaptation.values = {4.0};
  c.y0 = {0.0};
  c.gamma0 = {4.0};
  c.integrand.power = 2;
  const ChainModel m = build_model(c);
  // E[x^2] = sum w (mu^2 + sd^2)
  CHECK(std::get<RwmModel>(m).nu_f == doctest::Approx(0.25 * (4 + 0.25) + 0.75 * (1 + 1)));
}

TEST_CASE("families without a common invariant law are rejected") {
  RunConfig c = two_state_config();
  CHECK_NOTHROW(build_model(c));
  std::ostringstream mats;
  mats << "0.5 0.5\n0.5 0.5\n\n0.9 0.1\n0.5 0.5\n";
  const std::string path = "/tmp/air_test_members.txt";
  {
    std::ofstream f(path);
    f << mats.str();
  }
  c.kernel.family = "matrix_file";
  c.kernel.path = path;
  c.adaptation.values = {0, 1};
  c.gamma0 = {0};
  CHECK_THROWS_AS(build_model(c), ConfigError);
}

TEST_CASE("sweep flags") {
  SweepRow r = sweep_flags(1.0, 0.01, 0.0, 0.5);
  CHECK(r.t_large_beta);
  CHECK_FALSE(r.t_small_beta);
  r = sweep_flags(0.5, 0.1, 0.0, 0.5);
  CHECK_FALSE(r.t_small_beta);
  r = sweep_flags(0.5, 0.2, 0.0, 0.5);
  CHECK(r.t_small_beta);
  r = sweep_flags(1.0, 0.3, 4.0, 0.5);
  CHECK(r.lyapunov_threshold == doctest::Approx(0.25));
  CHECK(r.t_lyapunov);
  CHECK_FALSE(sweep_flags(1.0, 0.2, 4.0, 0.5).t_lyapunov);
  CHECK_FALSE(sweep_flags(0.5, 0.1, 0.0, 0.8).t_waning);
  CHECK(sweep_flags(0.5, 0.1, 0.0, 0.6).t_waning);

  RunConfig c = doeblin_config(0.5);
  c.horizon = 2000;
  c.replications = 4;
  const std::vector<double> betas{0.5, 1.0}, eps{0.1, 0.3};
  const auto rows = theorem_sweep(c, betas, eps, 0.0, 2);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].measured == (rows[0].t_small_beta || rows[0].t_waning));
  CHECK(rows[2].measured);
  CHECK(rows[2].rate == "sqrt_log");
  const std::vector<double> none;
  CHECK_THROWS(theorem_sweep(c, none, eps, 0.0));
}

TEST_CASE("failed studies are flushed with a marker") {
  Study s;
  s.config = two_state_config();
  s.failed = true;
  s.failure = "replication 3: boom";
  s.records.resize(2);
  std::ostringstream out;
  write_study(out, s);
  const std::string text = out.str();
  CHECK(text.find("\"record\":\"manifest\"") == 1);
  CHECK(text.find("\"record\":\"failure\"") != std::string::npos);
  CHECK(text.find("boom") != std::string::npos);
}
