#include "air/runner.hpp"

#include "air/errors.hpp"
#include "air/log.hpp"
#include "air/rng.hpp"
#include "air/tolerances.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

namespace air {

namespace {

bool is_finite_family(const std::string& family) {
  return family == "two_state" || family == "doeblin" || family == "matrix_file";
}

void require(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(key, message);
}

bool is_index(double v) { return v >= 0.0 && std::floor(v) == v && v < 1e15; }

// E[Z^k] for standard normal Z.
double normal_moment(unsigned k) {
  if (k % 2 == 1) return 0.0;
  double m = 1.0;
  for (unsigned i = k; i > 1; i -= 2) m *= static_cast<double>(i - 1);
  return m;
}

double binomial(unsigned n, unsigned k) {
  double r = 1.0;
  for (unsigned i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

bool is_counterexample(const RunConfig& c) { return c.adaptation.rule == "counterexample"; }

}  // namespace

double rate_value(std::uint64_t n, const RateSpec& spec) {
  if (spec.n_min < 2) throw DomainError("rate n_min must be >= 2");
  if (n < spec.n_min) throw DomainError("rate evaluated below n_min");
  if (!(spec.epsilon > 0.0)) throw DomainError("rate epsilon must be > 0");
  const double x = static_cast<double>(n);
  if (spec.kind == RateSpec::Kind::poly) return std::pow(x, 0.5 + spec.epsilon);
  return std::sqrt(x) * std::pow(std::log(x), 0.5 + spec.epsilon);
}

void RunConfig::validate() const {
  const auto& k = kernel;
  require(k.family == "two_state" || k.family == "doeblin" || k.family == "matrix_file" || k.family == "rwm",
          "kernel.family", "unknown kernel family '" + k.family + "'");
  const auto& a = adaptation;
  require(a.rule == "fixed_sequence" || a.rule == "acceptance_targeting" || a.rule == "empirical_moment" ||
              a.rule == "counterexample",
          "adaptation.rule", "unknown update rule '" + a.rule + "'");
  require(beta > 0.0 && std::isfinite(beta), "chain.beta", "beta must be > 0");
  require(horizon >= 2, "chain.horizon", "horizon must be >= 2");
  require(replications >= 1, "study.replications", "replications must be >= 1");
  require(rate.epsilon > 0.0 && std::isfinite(rate.epsilon), "rate.epsilon", "epsilon must be > 0");
  require(rate.n_min >= 2, "rate.n_min", "n_min must be >= 2");
  require(rate.n_min <= horizon, "rate.n_min", "n_min must not exceed the horizon");
  require(rho > 0.0 && rho < 1.0, "study.rho", "rho must lie in (0, 1)");
  require(threshold > 0.0, "study.threshold", "threshold must be > 0");
  require(!sweep_betas.empty(), "sweep.betas", "beta grid must be nonempty");
  require(!sweep_epsilons.empty(), "sweep.epsilons", "epsilon grid must be nonempty");
  for (double b : sweep_betas) require(b > 0.0, "sweep.betas", "beta must be > 0");
  for (double e : sweep_epsilons) require(e > 0.0, "sweep.epsilons", "epsilon must be > 0");
  require(sweep_p >= 0.0, "sweep.p", "moment order must be >= 0 (0 = none)");
  require(ell_max >= 1, "analysis.ell_max", "ell_max must be >= 1");
  require(!q_grid.empty(), "analysis.q_grid", "q grid must be nonempty");
  for (double q : q_grid) require(q > 0.0 && q <= 1.0, "analysis.q_grid", "q must lie in (0, 1]");
  require(a.gain_exponent > 0.0 && a.gain_exponent <= 1.0, "adaptation.gain_exponent",
          "gain exponent must lie in (0, 1]");
  require(a.target_rate > 0.0 && a.target_rate < 1.0, "adaptation.target_rate", "target rate must lie in (0, 1)");
  require(a.scale > 0.0, "adaptation.scale", "scale must be > 0");
  require(a.ridge >= 0.0, "adaptation.ridge", "ridge must be >= 0");
  if (a.rule == "fixed_sequence") require(!a.values.empty(), "adaptation.values", "fixed_sequence needs values");
  if (a.rule == "counterexample") {
    require(k.family == "two_state", "adaptation.rule", "counterexample rule needs kernel.family = two_state");
  }
  if (a.rule == "empirical_moment") {
    require(k.family == "rwm", "adaptation.rule", "empirical_moment needs kernel.family = rwm");
  }

  if (k.family == "two_state") {
    require(y0.size() == 1 && (y0[0] == 0.0 || y0[0] == 1.0), "chain.y0", "two_state y0 must be 0 or 1");
    require(gamma0.size() == 1 && gamma0[0] > 0.0 && gamma0[0] < 1.0, "chain.gamma0",
            "two_state gamma0 must lie in (0, 1)");
    if (a.rule == "fixed_sequence") {
      for (double v : a.values) require(v > 0.0 && v < 1.0, "adaptation.values", "values must lie in (0, 1)");
    }
  } else if (k.family == "doeblin") {
    require(k.states >= 2, "kernel.states", "states must be >= 2");
    require(k.alpha > 0.0 && k.alpha <= 1.0, "kernel.alpha", "alpha must lie in (0, 1]");
    require(k.members >= 1, "kernel.members", "members must be >= 1");
    require(y0.size() == 1 && is_index(y0[0]) && y0[0] < static_cast<double>(k.states), "chain.y0",
            "y0 must be a state index");
    require(gamma0.size() == 1 && is_index(gamma0[0]) && gamma0[0] < static_cast<double>(k.members),
            "chain.gamma0", "gamma0 must be a member index");
    if (a.rule == "fixed_sequence") {
      for (double v : a.values) {
        require(is_index(v) && v < static_cast<double>(k.members), "adaptation.values",
                "values must be member indices");
      }
    }
  } else if (k.family == "matrix_file") {
    require(!k.path.empty(), "kernel.path", "matrix_file needs a path");
    require(y0.size() == 1 && is_index(y0[0]), "chain.y0", "y0 must be a state index");
    require(gamma0.size() == 1 && is_index(gamma0[0]), "chain.gamma0", "gamma0 must be a member index");
    if (a.rule == "fixed_sequence") {
      for (double v : a.values) require(is_index(v), "adaptation.values", "values must be member indices");
    }
  } else {
    require(k.dim >= 1, "kernel.dim", "dim must be >= 1");
    require(k.a1 > 0.0 && k.a2 >= k.a1, "kernel.a1", "need 0 < a1 <= a2");
    require(y0.size() == k.dim, "chain.y0", "y0 must have dim components");
    require(gamma0.size() == 1 || gamma0.size() == k.dim * k.dim, "chain.gamma0",
            "gamma0 must be a scalar or a dim x dim matrix");
    require(k.target == "std_normal" || k.target == "gaussian_mixture", "kernel.target",
            "unknown target '" + k.target + "'");
    if (k.target == "gaussian_mixture") {
      require(k.dim == 1, "kernel.dim", "gaussian_mixture is one-dimensional");
      require(!k.mixture_weights.empty(), "kernel.mixture_weights", "mixture needs weights");
      require(k.mixture_means.size() == k.mixture_weights.size(), "kernel.mixture_means",
              "one mean per weight");
      require(k.mixture_sds.size() == k.mixture_weights.size(), "kernel.mixture_sds", "one sd per weight");
      for (double w : k.mixture_weights) require(w > 0.0, "kernel.mixture_weights", "weights must be > 0");
      for (double s : k.mixture_sds) require(s > 0.0, "kernel.mixture_sds", "sds must be > 0");
    }
    require(integrand.component < k.dim, "integrand.component", "component out of range");
    require(integrand.power >= 1, "integrand.power", "power must be >= 1");
    if (a.rule == "fixed_sequence") {
      for (double v : a.values) require(v > 0.0, "adaptation.values", "values must be > 0");
    }
  }
  if (is_finite_family(k.family)) {
    for (double v : integrand.values) require(std::isfinite(v), "integrand.values", "values must be finite");
  }
}

FiniteKernelFamily build_doeblin(const KernelSpec& spec, Vector* target) {
  Rng rng(derive_seed(spec.family_seed, 0));
  const auto n = static_cast<Eigen::Index>(spec.states);
  Vector pi(n);
  for (Eigen::Index i = 0; i < n; ++i) pi(i) = 0.5 + uniform01(rng);
  pi /= pi.sum();
  std::vector<Matrix> base;
  for (std::size_t m = 0; m < spec.members; ++m) {
    Matrix Q(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) Q(i, j) = 0.05 + uniform01(rng);
      Q.row(i) /= Q.row(i).sum();
    }
    base.push_back(metropolis_matrix(Q, pi));
  }
  if (target) *target = pi;
  return doeblin_family(std::move(base), spec.alpha, pi);
}

ChainModel build_model(const RunConfig& config) {
  config.validate();
  const KernelSpec& k = config.kernel;
  if (k.family == "rwm") {
    RwmModel model;
    model.dim = k.dim;
    model.box = k.dim == 1 ? ParameterBox::interval(k.a1, k.a2) : ParameterBox::eigen_box(k.dim, k.a1, k.a2);
    model.power = config.integrand.power;
    model.component = config.integrand.component;
    const unsigned p = model.power;
    if (k.target == "std_normal") {
      model.log_density = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
      model.nu_f = normal_moment(p);
    } else {
      const double total = [&] {
        double s = 0.0;
        for (double w : k.mixture_weights) s += w;
        return s;
      }();
      std::vector<double> w, mu, sd;
      for (std::size_t i = 0; i < k.mixture_weights.size(); ++i) {
        w.push_back(k.mixture_weights[i] / total);
        mu.push_back(k.mixture_means[i]);
        sd.push_back(k.mixture_sds[i]);
      }
      model.log_density = [w, mu, sd](const Vector& x) {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(w.size());
        for (std::size_t i = 0; i < w.size(); ++i) {
          const double z = (x(0) - mu[i]) / sd[i];
          terms[i] = std::log(w[i]) - std::log(sd[i]) - 0.5 * z * z;
          best = std::max(best, terms[i]);
        }
        double s = 0.0;
        for (double t : terms) s += std::exp(t - best);
        return best + std::log(s);
      };
      double nu = 0.0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        double m = 0.0;
        for (unsigned j = 0; j <= p; ++j) {
          m += binomial(p, j) * std::pow(mu[i], p - j) * std::pow(sd[i], j) * normal_moment(j);
        }
        nu += w[i] * m;
      }
      model.nu_f = nu;
    }
    return model;
  }

  FiniteModel model;
  if (k.family == "two_state") {
    model.family = std::make_shared<FiniteKernelFamily>(two_state_family());
  } else if (k.family == "doeblin") {
    model.family = std::make_shared<FiniteKernelFamily>(build_doeblin(k));
  } else {
    std::vector<Matrix> members;
    try {
      members = read_matrices_file(k.path);
    } catch (const std::exception& e) {
      throw ConfigError("kernel.path", e.what());
    }
    if (members.empty()) throw ConfigError("kernel.path", "no matrices in " + k.path);
    model.family = std::make_shared<FiniteKernelFamily>(matrix_family(std::move(members)));
    const auto count = static_cast<double>(model.family->box().count);
    if (config.gamma0[0] >= count) throw ConfigError("chain.gamma0", "gamma0 must be a member index");
    for (double v : config.adaptation.values) {
      if (config.adaptation.rule == "fixed_sequence" && v >= count) {
        throw ConfigError("adaptation.values", "values must be member indices");
      }
    }
  }
  const auto& fam = *model.family;
  const auto n = static_cast<Eigen::Index>(fam.states());
  if (config.y0[0] >= static_cast<double>(n)) throw ConfigError("chain.y0", "y0 must be a state index");
  if (config.integrand.values.empty()) {
    model.f = Vector::Zero(n);
    model.f(0) = 1.0;
  } else {
    if (config.integrand.values.size() != fam.states()) {
      throw ConfigError("integrand.values", "need one value per state");
    }
    model.f = Eigen::Map<const Vector>(config.integrand.values.data(), n);
  }
  // nu(f) must be exact and common to every member the chain can visit.
  const Vector pi = fam.invariant(scalar_parameter(config.gamma0[0]));
  model.nu_f = pi.dot(model.f);
  for (const Parameter& g : fam.parameter_grid()) {
    const Vector other = fam.invariant(g);
    if ((other - pi).lpNorm<Eigen::Infinity>() > tol::invariance) {
      throw ConfigError("kernel.family", "family members do not share an invariant law, nu(f) is undefined");
    }
  }
  return model;
}

UpdateRule build_rule(const RunConfig& config, const ChainModel& model) {
  UpdateRule rule;
  rule.box = std::holds_alternative<FiniteModel>(model) ? std::get<FiniteModel>(model).family->box()
                                                         : std::get<RwmModel>(model).box;
  const RuleSpec& a = config.adaptation;
  if (a.rule == "fixed_sequence") {
    FixedSequence fs;
    fs.cyclic = a.cyclic;
    for (double v : a.values) {
      Parameter p = scalar_parameter(v);
      if (rule.box.kind == ParameterBox::Kind::eigen_box) {
        p = Eigen::Map<const Vector>((v * Matrix::Identity(rule.box.dim, rule.box.dim)).eval().data(),
                                     static_cast<Eigen::Index>(rule.box.dim * rule.box.dim));
      }
      fs.values.push_back(p);
    }
    rule.kind = fs;
  } else if (a.rule == "acceptance_targeting") {
    rule.kind = AcceptanceTargeting{a.target_rate, a.gain_exponent};
  } else if (a.rule == "empirical_moment") {
    rule.kind = EmpiricalMoment{a.scale, a.ridge};
  } else {
    rule.kind = CounterexampleRule{};
  }
  return rule;
}

std::vector<std::uint64_t> geometric_checkpoints(std::uint64_t n_min, std::uint64_t horizon) {
  std::vector<std::uint64_t> out;
  for (int k = 0;; ++k) {
    const double v = std::ceil(static_cast<double>(n_min) * std::pow(1.1, k) - 1e-9);
    if (v > static_cast<double>(horizon)) break;
    const auto n = static_cast<std::uint64_t>(v);
    if (out.empty() || out.back() != n) out.push_back(n);
  }
  if (out.empty() || out.back() != horizon) out.push_back(horizon);
  return out;
}

std::shared_ptr<const std::vector<double>> inverse_rate_table(const RateSpec& spec, std::uint64_t horizon) {
  auto table = std::make_shared<std::vector<double>>(horizon + 1, 0.0);
  for (std::uint64_t n = spec.n_min; n <= horizon; ++n) (*table)[n] = 1.0 / rate_value(n, spec);
  return table;
}

NormalizedSums::NormalizedSums(const RateSpec& spec, std::uint64_t horizon,
                               std::shared_ptr<const std::vector<double>> inverse_rate)
    : spec_(spec), horizon_(horizon), inverse_rate_(std::move(inverse_rate)) {
  if (spec.n_min < 2) throw DomainError("rate n_min must be >= 2");
  if (horizon < spec.n_min) throw DomainError("horizon must be >= n_min");
  if (!inverse_rate_) inverse_rate_ = inverse_rate_table(spec, horizon);
  if (inverse_rate_->size() < horizon + 1) throw DomainError("inverse rate table shorter than horizon");
  checkpoints_ = geometric_checkpoints(spec.n_min, horizon);
  diag_.n_min = spec.n_min;
}

void NormalizedSums::add(double centred) {
  ++n_;
  sum_ += centred;
  if (n_ < spec_.n_min || n_ > horizon_) return;
  const double normalized = sum_ * (*inverse_rate_)[n_];
  diag_.c_hat = std::max(diag_.c_hat, std::abs(normalized));
  if (next_checkpoint_ < checkpoints_.size() && checkpoints_[next_checkpoint_] == n_) {
    diag_.checkpoints.push_back(n_);
    diag_.normalized.push_back(normalized);
    ++next_checkpoint_;
  }
  if (n_ == horizon_) diag_.tail_value = normalized;
}

RateDiagnostics NormalizedSums::finish() const {
  RateDiagnostics d = diag_;
  d.bound_form.clear();
  for (std::uint64_t n : d.checkpoints) {
    d.bound_form.push_back(d.c_hat / ((*inverse_rate_)[n] * static_cast<double>(n)));
  }
  return d;
}

RateDiagnostics normalized_sums(std::span<const double> f_values, double nu_f, const RateSpec& spec) {
  const std::uint64_t horizon = f_values.size();
  NormalizedSums acc(spec, horizon);
  for (double v : f_values) acc.add(v - nu_f);
  return acc.finish();
}

FiniteTrajectory RecordedTrajectory::finite() const {
  FiniteTrajectory t;
  for (const auto& s : states) {
    if (s.size() != 1 || !is_index(s[0])) throw DomainError("trajectory is not finite-state");
    t.states.push_back(static_cast<std::size_t>(s[0]));
  }
  t.param_ids = param_ids;
  return t;
}

namespace {

struct ParamIds {
  std::vector<Parameter>* table;
  std::map<std::vector<double>, std::size_t> ids;

  std::size_t operator()(const Parameter& p) {
    std::vector<double> key(p.data(), p.data() + p.size());
    auto [it, inserted] = ids.try_emplace(key, table->size());
    if (inserted) table->push_back(p);
    return it->second;
  }
};

Parameter initial_parameter(const RunConfig& config, const UpdateRule& rule, const AirSchedule& schedule) {
  if (is_counterexample(config)) return scalar_parameter(epoch_counterexample_gamma(0, schedule));
  Parameter g = Eigen::Map<const Vector>(config.gamma0.data(), static_cast<Eigen::Index>(config.gamma0.size()));
  if (rule.box.kind == ParameterBox::Kind::eigen_box && g.size() == 1) {
    const double v = g(0);
    const auto d = static_cast<Eigen::Index>(rule.box.dim);
    g = Eigen::Map<const Vector>((v * Matrix::Identity(d, d)).eval().data(), d * d);
  }
  if (!rule.box.contains(g)) throw ConfigError("chain.gamma0", "gamma0 lies outside the parameter set");
  return g;
}

class FiniteSimulation {
 public:
  FiniteSimulation(const FiniteModel& model) : model_(model) {}

  const RowSampler& sampler(const Parameter& g) {
    std::vector<double> key(g.data(), g.data() + g.size());
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    if (cache_.size() >= 256) cache_.clear();
    auto s = std::make_shared<RowSampler>(model_.family->matrix(g));
    return *cache_.emplace(std::move(key), std::move(s)).first->second;
  }

 private:
  const FiniteModel& model_;
  std::map<std::vector<double>, std::shared_ptr<RowSampler>> cache_;
};

}  // namespace

RunResult run_air(const RunConfig& config, const ChainModel& model, std::uint64_t seed, const RunOptions& options) {
  const std::uint64_t N = config.horizon;
  const AirSchedule schedule(config.beta, std::min<std::uint64_t>(N, 10'000'000));
  const UpdateRule rule = build_rule(config, model);
  Rng rng(seed);

  RunResult result;
  NormalizedSums sums(config.rate, N, options.inverse_rate);
  Parameter gamma = initial_parameter(config, rule, schedule);
  result.windows.push_back({0, 0, gamma, 0.0});

  std::vector<Parameter> param_table;
  ParamIds ids{&param_table, {}};
  if (options.record_trajectory) result.trajectory.emplace();
  auto* traj = options.record_trajectory ? &*result.trajectory : nullptr;

  std::uint64_t m_next = 1;
  std::uint64_t t_next = schedule.adaptation_time(1);
  std::uint64_t accepted = 0;
  double sum_f = 0.0;
  const bool finite = std::holds_alternative<FiniteModel>(model);
  HistorySummary history(finite ? 1 : std::get<RwmModel>(model).dim);

  auto adapt_if_due = [&](std::uint64_t n) {
    if (n == 0 || n != t_next) return false;
    const double rate = history.window_acceptance_rate();
    gamma = apply_update(rule, history, m_next, gamma, schedule);
    result.windows.push_back({m_next, n, gamma, rate});
    history.start_window();
    ++m_next;
    t_next = schedule.adaptation_time(m_next);
    return true;
  };
  auto record = [&](std::uint64_t n, const std::vector<double>& state, double fv) {
    if (!traj) return;
    traj->states.push_back(state);
    traj->windows.push_back(m_next - 1);
    traj->param_ids.push_back(ids(gamma));
    traj->f_values.push_back(fv);
    (void)n;
  };

  if (finite) {
    const FiniteModel& fm = std::get<FiniteModel>(model);
    FiniteSimulation sim(fm);
    const auto y0 = static_cast<std::size_t>(config.y0[0]);
    std::size_t y = y0;
    const RowSampler* sampler = &sim.sampler(gamma);
    const double nu = fm.nu_f;
    for (std::uint64_t n = 0;; ++n) {
      if (adapt_if_due(n)) sampler = &sim.sampler(gamma);
      record(n, {static_cast<double>(y)}, fm.f(static_cast<Eigen::Index>(y)));
      if (n == N) break;
      const std::size_t next = (*sampler)(y, rng);
      const bool moved = next != y;
      history.record_step(moved);
      accepted += moved ? 1 : 0;
      if (next != y0) result.stayed_at_start = false;
      y = next;
      const double fv = fm.f(static_cast<Eigen::Index>(y));
      sum_f += fv;
      sums.add(fv - nu);
    }
  } else {
    const RwmModel& rm = std::get<RwmModel>(model);
    Vector x = Eigen::Map<const Vector>(config.y0.data(), static_cast<Eigen::Index>(config.y0.size()));
    const Vector x0 = x;
    double log_px = rm.log_density(x);
    if (!std::isfinite(log_px)) throw ConfigError("chain.y0", "target density vanishes at y0");
    auto factor = [&] {
      Eigen::LLT<Matrix> llt(proposal_covariance(gamma, rm.dim));
      if (llt.info() != Eigen::Success) throw NumericalError("proposal covariance is not positive definite");
      return Matrix(llt.matrixL());
    };
    Matrix chol = factor();
    const auto c = static_cast<Eigen::Index>(rm.component);
    auto fval = [&](const Vector& v) { return std::pow(v(c), static_cast<double>(rm.power)); };
    history.record_state(x);
    for (std::uint64_t n = 0;; ++n) {
      if (adapt_if_due(n)) chol = factor();
      if (traj) record(n, std::vector<double>(x.data(), x.data() + x.size()), fval(x));
      if (n == N) break;
      double log_new = log_px;
      RwmResult step = rwm_step_factored(x, log_px, chol, rm.log_density, rng, &log_new);
      if (!step.x.allFinite()) throw NumericalError("non-finite state at step " + std::to_string(n + 1));
      if (step.accepted) {
        x = std::move(step.x);
        log_px = log_new;
      }
      history.record_step(step.accepted);
      history.record_state(x);
      accepted += step.accepted ? 1 : 0;
      if (x != x0) result.stayed_at_start = false;
      const double fv = fval(x);
      sum_f += fv;
      sums.add(fv - rm.nu_f);
    }
  }
  if (traj) traj->params = std::move(param_table);
  result.diagnostics = sums.finish();
  result.mean_f = sum_f / static_cast<double>(N);
  result.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(N);
  return result;
}

RunResult run_air(const RunConfig& config, std::uint64_t seed, const RunOptions& options) {
  return run_air(config, build_model(config), seed, options);
}

double counterexample_theta() {
  long double p = 1.0L;
  for (int j = 0; j < 64; ++j) p *= 1.0L - std::exp(-static_cast<long double>(j + 1));
  return static_cast<double>(p);
}

namespace {

ReplicationRecord make_record(const RunConfig& config, std::uint64_t index, std::uint64_t seed,
                              const RunResult& r) {
  ReplicationRecord rec;
  rec.index = index;
  rec.seed = seed;
  rec.c_hat = r.diagnostics.c_hat;
  rec.tail_value = r.diagnostics.tail_value;
  rec.mean_f = r.mean_f;
  rec.stuck = r.stayed_at_start;
  rec.acceptance_rate = r.acceptance_rate;
  rec.adaptations = r.windows.size() - 1;
  rec.final_parameter = r.windows.back().parameter;
  std::vector<Parameter> params;
  for (const auto& w : r.windows) params.push_back(w.parameter);
  const std::uint64_t K = rec.adaptations;
  if (K >= 1) {
    rec.waning_final = waning_statistic(params, config.rho, K);
    if (K >= 2) rec.waning_decreasing = rec.waning_final <= waning_statistic(params, config.rho, (K + 1) / 2);
  }
  return rec;
}

double exact_stay_probability(const RunConfig& config) {
  const AirSchedule schedule(config.beta, std::min<std::uint64_t>(config.horizon, 10'000'000));
  long double p = 1.0L;
  std::uint64_t n = 0;
  for (std::uint64_t m = 0; n < config.horizon; ++m) {
    const std::uint64_t end = std::min(config.horizon, schedule.adaptation_time(m + 1));
    const long double g = epoch_counterexample_gamma(m, schedule);
    p *= std::pow(1.0L - g, static_cast<long double>(end - n));
    n = end;
  }
  return static_cast<double>(p);
}

}  // namespace

StudySummary summarize(const RunConfig& config, const ChainModel& model, std::span<const ReplicationRecord> records) {
  StudySummary s;
  s.replications = records.size();
  s.horizon = config.horizon;
  s.threshold = config.threshold;
  s.nu_f = std::visit([](const auto& m) { return m.nu_f; }, model);
  if (records.empty()) return s;
  std::vector<double> c_hat, abs_tail;
  double below = 0.0, stuck = 0.0, waning = 0.0, mean = 0.0;
  for (const auto& r : records) {
    c_hat.push_back(r.c_hat);
    abs_tail.push_back(std::abs(r.tail_value));
    below += std::abs(r.tail_value) < config.threshold ? 1.0 : 0.0;
    stuck += r.stuck ? 1.0 : 0.0;
    waning += r.waning_decreasing ? 1.0 : 0.0;
    mean += r.mean_f;
  }
  const double R = static_cast<double>(records.size());
  s.c_hat_median = quantile(c_hat, 0.5);
  s.c_hat_q05 = quantile(c_hat, 0.05);
  s.c_hat_q95 = quantile(c_hat, 0.95);
  s.abs_tail_median = quantile(abs_tail, 0.5);
  s.fraction_below_threshold = below / R;
  s.waning_decreasing_fraction = waning / R;
  s.mean_f = mean / R;
  double var = 0.0;
  for (const auto& r : records) var += (r.mean_f - s.mean_f) * (r.mean_f - s.mean_f);
  s.mean_f_se = records.size() > 1 ? std::sqrt(var / (R - 1.0) / R) : 0.0;
  const double dev = s.mean_f - s.nu_f;
  if (s.mean_f_se > 0.0) {
    s.lln_z = dev / s.mean_f_se;
    s.lln_failure = std::abs(s.lln_z) > 5.0;
  } else {
    s.lln_z = 0.0;
    s.lln_failure = records.size() > 1 && std::abs(dev) > 1e-12;
  }
  s.stuck_fraction = stuck / R;
  s.counterexample = is_counterexample(config);
  if (s.counterexample) {
    s.theta = counterexample_theta();
    s.stay_probability = exact_stay_probability(config);
    s.stuck_se = std::sqrt(s.theta * (1.0 - s.theta) / R);
    s.stuck_z = (s.stuck_fraction - s.theta) / s.stuck_se;
  } else {
    s.stuck_se = std::sqrt(s.stuck_fraction * (1.0 - s.stuck_fraction) / R);
  }
  return s;
}

Study replicate(const RunConfig& config, unsigned workers) {
  Study study;
  study.config = config;
  const ChainModel model = build_model(config);
  const auto inverse_rate = inverse_rate_table(config.rate, config.horizon);
  const std::uint64_t R = config.replications;
  std::vector<std::optional<ReplicationRecord>> slots(R);
  std::atomic<std::uint64_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex failure_mutex;
  std::uint64_t failed_index = R;
  std::string failure;

  auto work = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::uint64_t r = next.fetch_add(1);
      if (r >= R) return;
      const std::uint64_t seed = derive_seed(config.seed, r);
      try {
        RunOptions opts;
        opts.inverse_rate = inverse_rate;
        slots[r] = make_record(config, r, seed, run_air(config, model, seed, opts));
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        if (r < failed_index) {
          failed_index = r;
          failure = "replication " + std::to_string(r) + ": " + e.what();
        }
        abort.store(true);
        return;
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::min<std::uint64_t>(R, 1024))));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& slot : slots) {
    if (slot) study.records.push_back(std::move(*slot));
  }
  if (!failure.empty()) {
    study.failed = true;
    study.failure = failure;
  }
  study.summary = summarize(config, model, study.records);
  return study;
}

SweepRow sweep_flags(double beta, double epsilon, double p, double rho) {
  SweepRow row;
  row.beta = beta;
  row.epsilon = epsilon;
  row.t_large_beta = beta >= 1.0 && epsilon > 0.0;
  row.t_small_beta = beta > 0.0 && beta < 1.0 && epsilon > 1.0 / (1.0 + beta) - 0.5;
  if (p > 0.0) {
    row.lyapunov_threshold = std::max(0.0, 1.0 / (1.0 + beta) + 1.0 / p - 0.5);
    row.t_lyapunov = epsilon > row.lyapunov_threshold;
  }
  row.t_waning = beta > 0.0 && beta < 1.0 && beta >= 2.0 * rho - 1.0;
  row.rate = beta >= 1.0 ? "sqrt_log" : "poly";
  return row;
}

std::vector<SweepRow> theorem_sweep(const RunConfig& config, std::span<const double> betas,
                                    std::span<const double> epsilons, double p, unsigned workers, bool measure) {
  if (betas.empty() || epsilons.empty()) throw DomainError("sweep grids must be nonempty");
  std::vector<SweepRow> rows;
  for (double beta : betas) {
    for (double eps : epsilons) {
      SweepRow row = sweep_flags(beta, eps, p, config.rho);
      const bool admissible = row.t_large_beta || row.t_small_beta || row.t_lyapunov || row.t_waning;
      if (measure && admissible) {
        RunConfig cell = config;
        cell.beta = beta;
        cell.rate.epsilon = eps;
        cell.rate.kind = beta >= 1.0 ? RateSpec::Kind::sqrt_log : RateSpec::Kind::poly;
        const Study study = replicate(cell, workers);
        if (study.failed) throw NumericalError("sweep cell failed: " + study.failure);
        std::vector<double> waning;
        for (const auto& r : study.records) waning.push_back(r.waning_final);
        row.measured = true;
        row.abs_tail_median = study.summary.abs_tail_median;
        row.fraction_below_threshold = study.summary.fraction_below_threshold;
        row.waning_final_median = quantile(waning, 0.5);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace air
