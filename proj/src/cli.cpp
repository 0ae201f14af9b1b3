#include "air/cli.hpp"

#include "air/analysis.hpp"
#include "air/config.hpp"
#include "air/decomposition.hpp"
#include "air/errors.hpp"
#include "air/log.hpp"
#include "air/records.hpp"
#include "air/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace air {

namespace {

struct Options {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<double> epsilon;
  std::optional<std::uint64_t> replications;
  std::optional<std::uint64_t> horizon;
  bool quiet = false;
  unsigned workers = 0;
  std::optional<std::uint64_t> m;
  std::string kernel = "twostate";
  std::vector<double> gammas{0.25};
  std::string kernel_file;
  std::string trajectory;
  std::vector<double> f;
  std::optional<double> p;
};

unsigned worker_count(const Options& o) {
  if (o.workers > 0) return o.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

void apply_overrides(RunConfig& c, const Options& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.beta) c.beta = *o.beta;
  if (o.epsilon) c.rate.epsilon = *o.epsilon;
  if (o.replications) c.replications = *o.replications;
  if (o.horizon) c.horizon = *o.horizon;
  c.validate();
}

RunConfig config_from(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config", "a config file is required");
  RunConfig c = load_config(o.config);
  apply_overrides(c, o);
  return c;
}

std::filesystem::path out_path(const Options& o, const std::string& name) {
  std::filesystem::create_directories(o.out_dir);
  return std::filesystem::path(o.out_dir) / name;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << std::setprecision(17);
  return f;
}

std::string vec_str(const Vector& v) {
  std::ostringstream s;
  s << std::setprecision(10) << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) s << (i ? ", " : "") << v(i);
  s << ')';
  return s.str();
}

int cmd_schedule(const Options& o, std::ostream& out) {
  const double beta = o.beta.value_or(1.0);
  const std::uint64_t m_max = o.m.value_or(10);
  const AirSchedule s(beta);
  bool ok = true;
  out << "T =";
  for (std::uint64_t m = 1; m <= m_max; ++m) out << (m > 1 ? ", " : " ") << s.adaptation_time(m);
  out << "\n\n";
  out << std::setw(8) << "m" << std::setw(10) << "k_m" << std::setw(14) << "T_m" << std::setw(18) << "c m^(1+b)"
      << std::setw(18) << "C m^(1+b)" << "  envelope\n";
  for (std::uint64_t m = 1; m <= m_max; ++m) {
    const auto T = s.adaptation_time(m);
    const Envelope e = s.growth_envelope(m);
    const bool in = e.lower <= static_cast<double>(T) && static_cast<double>(T) <= e.upper;
    ok = ok && in;
    out << std::setw(8) << m << std::setw(10) << s.window_length(m) << std::setw(14) << T << std::setw(18)
        << std::setprecision(8) << e.lower << std::setw(18) << e.upper << "  " << (in ? "ok" : "VIOLATED") << '\n';
  }
  out << "c = " << s.lower_constant() << ", C = " << s.upper_constant() << '\n';
  return ok ? exit_ok : exit_audit;
}

std::vector<Matrix> analysis_members(const Options& o) {
  if (!o.kernel_file.empty()) {
    try {
      return read_matrices_file(o.kernel_file);
    } catch (const std::exception& e) {
      throw ConfigError("--kernel-file", e.what());
    }
  }
  if (o.kernel != "twostate" && o.kernel != "two_state") {
    throw ConfigError("--kernel", "unknown kernel '" + o.kernel + "' (use twostate or --kernel-file)");
  }
  std::vector<Matrix> members;
  for (double g : o.gammas) {
    if (!(g > 0.0 && g < 1.0)) throw ConfigError("--gamma", "gamma must lie in (0, 1)");
    members.push_back(two_state_matrix(g));
  }
  return members;
}

int cmd_analyze(const Options& o, std::ostream& out) {
  const std::vector<Matrix> members = analysis_members(o);
  if (members.empty()) throw ConfigError("--kernel-file", "no matrices");
  const auto n = members.front().rows();
  for (const Matrix& P : members) {
    if (P.rows() != n) throw ConfigError("--kernel-file", "members must share one state space");
    check_stochastic(P);
  }
  Vector f = Vector::Zero(n);
  if (o.f.empty()) {
    f(0) = 1.0;
  } else {
    if (static_cast<Eigen::Index>(o.f.size()) != n) throw ConfigError("--f", "need one value per state");
    f = Eigen::Map<const Vector>(o.f.data(), n);
  }
  const CostModel model = trivial_cost_model(static_cast<std::size_t>(n));
  const double L = lipschitz_constant(f, model.cost);
  bool ok = true;
  out << std::setprecision(10);
  out << "states = " << n << ", members = " << members.size() << ", f = " << vec_str(f) << ", L = " << L
      << " (trivial metric)\n";
  for (std::size_t i = 0; i < members.size(); ++i) {
    const Matrix& P = members[i];
    out << "\nmember " << i;
    if (o.kernel_file.empty()) out << " (gamma = " << o.gammas[i] << ")";
    out << '\n';
    const ContractionReport one = contraction_coefficient(P, model, 1);
    out << "  tau = " << one.tau_ell << " (ell = 1)\n";
    const PoissonSolution sol = poisson_solve(P, f);
    out << "  pi = " << vec_str(sol.pi) << ", pi(f) = " << sol.pi_f << '\n';
    out << "  u = " << vec_str(sol.u) << '\n';
    out << "  residual = " << sol.residual << '\n';
    if (sol.series_checked) {
      out << "  series agreement = " << sol.series_agreement << " (" << sol.series_terms << " terms, tail <= "
          << sol.series_tail_bound << ")\n";
    }
    const std::vector<Matrix> single{P};
    const ContractionReport rep = contraction_constants(single, model, 64);
    out << "  k0 = " << rep.k0 << ", tau(P^k0) = " << rep.tau << ", M = " << rep.M << '\n';
    if (rep.tau < 1.0) {
      const PoissonBoundAudit audit = poisson_bound_check(sol, model, L, rep);
      out << "  bound = " << vec_str(audit.bound) << ", min slack = " << audit.min_slack
          << (audit.ok ? "  ok" : "  VIOLATED") << '\n';
      ok = ok && audit.ok;
    } else {
      out << "  no contraction within ell <= 64, bound skipped\n";
    }
  }
  if (members.size() > 1) {
    const ContractionReport rep = contraction_constants(members, model, 64);
    out << "\nfamily: k0 = " << rep.k0 << ", tau = " << rep.tau << ", M = " << rep.M << '\n';
  }
  return ok ? exit_ok : exit_audit;
}

int cmd_run(const Options& o, std::ostream& out) {
  const RunConfig c = config_from(o);
  const ChainModel model = build_model(c);
  RunOptions ro;
  ro.record_trajectory = !o.out_dir.empty();
  const RunResult r = run_air(c, model, c.seed, ro);
  if (!o.out_dir.empty()) {
    auto f = open_out(out_path(o, "run.jsonl"));
    write_run(f, c, c.seed, r);
    auto t = open_out(out_path(o, "trajectory.csv"));
    write_trajectory_csv(t, c, c.seed, *r.trajectory);
  }
  if (!o.quiet) {
    out << std::setprecision(8) << "horizon = " << c.horizon << ", adaptations = " << r.windows.size() - 1
        << "\nS_N f = " << r.mean_f << ", nu(f) = " << std::visit([](const auto& m) { return m.nu_f; }, model)
        << "\nC_hat = " << r.diagnostics.c_hat << ", tail = " << r.diagnostics.tail_value
        << "\nacceptance = " << r.acceptance_rate << "\nfinal parameter = " << vec_str(r.windows.back().parameter)
        << '\n';
  }
  return exit_ok;
}

void print_summary(const StudySummary& s, std::ostream& out) {
  out << std::setprecision(8) << "replications = " << s.replications << ", horizon = " << s.horizon
      << "\nC_hat median = " << s.c_hat_median << " [q05 " << s.c_hat_q05 << ", q95 " << s.c_hat_q95 << "]"
      << "\n|tail| median = " << s.abs_tail_median << ", fraction below " << s.threshold << " = "
      << s.fraction_below_threshold << "\nmean S_N f = " << s.mean_f << " +- " << s.mean_f_se
      << ", nu(f) = " << s.nu_f << ", z = " << s.lln_z << (s.lln_failure ? "  LLN FAILURE" : "") << '\n';
}

int write_and_report(const Options& o, const Study& study, const char* file) {
  if (!o.out_dir.empty()) {
    auto f = open_out(out_path(o, file));
    write_study(f, study);
  }
  if (study.failed) throw std::runtime_error("study aborted: " + study.failure);
  return exit_ok;
}

int cmd_replicate(const Options& o, std::ostream& out) {
  const RunConfig c = config_from(o);
  const Study study = replicate(c, worker_count(o));
  const int code = write_and_report(o, study, "study.jsonl");
  if (!o.quiet) print_summary(study.summary, out);
  return code;
}

int cmd_counterexample(const Options& o, std::ostream& out) {
  RunConfig c;
  if (!o.config.empty()) {
    c = load_config(o.config);
  } else {
    c.kernel.family = "two_state";
    c.adaptation.rule = "counterexample";
    c.y0 = {1.0};
    c.integrand.values = {0.0, 1.0};
    c.replications = 10'000;
    c.beta = o.beta.value_or(1.0);
    c.horizon = AirSchedule(c.beta).adaptation_time(20);
  }
  apply_overrides(c, o);
  const Study study = replicate(c, worker_count(o));
  const int code = write_and_report(o, study, "counterexample.jsonl");
  const StudySummary& s = study.summary;
  const double lo = s.theta - 3.0 * s.stuck_se;
  const double hi = s.theta + 3.0 * s.stuck_se;
  const bool within = s.stuck_fraction >= lo && s.stuck_fraction <= hi;
  if (!o.quiet) {
    out << std::setprecision(10) << "replications = " << s.replications << ", horizon = " << s.horizon
        << ", beta = " << c.beta << "\nstuck fraction = " << s.stuck_fraction << "\ntheta = " << s.theta
        << " (exact stay probability to N = " << s.stay_probability << ")\nSE = " << s.stuck_se
        << ", 3 SE band = [" << lo << ", " << hi << "], " << (within ? "within band" : "OUTSIDE band")
        << "\nLLN failure flagged: " << (s.lln_failure ? "yes" : "no") << '\n';
  }
  return code != exit_ok ? code : (within ? exit_ok : exit_audit);
}

int cmd_sweep(const Options& o, std::ostream& out) {
  const RunConfig c = config_from(o);
  const double p = o.p.value_or(c.sweep_p);
  const auto rows = theorem_sweep(c, c.sweep_betas, c.sweep_epsilons, p, worker_count(o));
  if (!o.out_dir.empty()) {
    auto f = open_out(out_path(o, "sweep.jsonl"));
    f << manifest_record("sweep", c, c.seed).dump() << '\n';
    for (const auto& r : rows) f << to_json(r).dump() << '\n';
  }
  if (!o.quiet) {
    out << std::setw(8) << "beta" << std::setw(10) << "eps" << std::setw(7) << "large" << std::setw(7) << "small"
        << std::setw(7) << "drift" << std::setw(7) << "waning" << std::setw(10) << "rate" << std::setw(16)
        << "|tail| median" << '\n';
    for (const auto& r : rows) {
      auto mark = [](bool b) { return b ? "yes" : "-"; };
      out << std::setprecision(6) << std::setw(8) << r.beta << std::setw(10) << r.epsilon << std::setw(7)
          << mark(r.t_large_beta) << std::setw(7) << mark(r.t_small_beta) << std::setw(7) << mark(r.t_lyapunov)
          << std::setw(7) << mark(r.t_waning) << std::setw(10) << (r.measured ? r.rate : "-") << std::setw(16);
      if (r.measured) out << r.abs_tail_median; else out << "-";
      out << '\n';
    }
  }
  return exit_ok;
}

int cmd_decompose(const Options& o, std::ostream& out) {
  const RunConfig c = config_from(o);
  if (o.trajectory.empty()) throw ConfigError("--trajectory", "a trajectory file is required");
  const ChainModel model = build_model(c);
  if (!std::holds_alternative<FiniteModel>(model)) {
    throw ConfigError("kernel.family", "decompose needs a finite-state family");
  }
  const FiniteModel& fm = std::get<FiniteModel>(model);
  std::ifstream in(o.trajectory);
  if (!in) throw ConfigError("--trajectory", "cannot open " + o.trajectory);
  const RecordedTrajectory rec = read_trajectory_csv(in);
  const FiniteTrajectory traj = rec.finite();
  for (std::size_t s : traj.states) {
    if (s >= fm.family->states()) throw DomainError("trajectory state outside the family's state space");
  }
  ParameterModels models;
  std::vector<Matrix> visited;
  for (std::size_t id = 0; id < rec.params.size(); ++id) {
    Matrix P = fm.family->matrix(rec.params[id]);
    models[id] = ParameterModel{P, poisson_solve(P, fm.f)};
    visited.push_back(std::move(P));
  }
  const AirSchedule schedule(c.beta);
  const DecompositionReport rep = decompose(traj, fm.f, models, schedule, false);
  const double rel = rep.identity_residual / std::max(1.0, std::abs(rep.lhs));
  bool ok = rel <= 1e-8 && rep.nonzero_within_window_terms == 0;

  const CostModel cost = trivial_cost_model(fm.family->states());
  const ContractionReport cr = contraction_constants(visited, cost, c.ell_max);
  std::optional<RemainderAudit> ra;
  std::optional<MartingaleAudit> ma;
  if (cr.tau < 1.0) {
    BoundInputs bi;
    bi.k0 = cr.k0;
    bi.L = lipschitz_constant(fm.f, cost.cost);
    bi.M = cr.M;
    bi.tau = cr.tau;
    bi.K = 0.0;
    for (const auto& [id, pm] : models) bi.K = std::max(bi.K, eccentricities(cost, pm.solution.pi).maxCoeff());
    ra = remainder_audit(rep, bi, rep.n, c.beta);
    ma = martingale_audit(std::span<const DecompositionReport>(&rep, 1), bi);
    ok = ok && ra->ok && ma->ok;
  }
  if (!o.out_dir.empty()) {
    auto f = open_out(out_path(o, "decomposition.jsonl"));
    f << manifest_record("decomposition", c, c.seed).dump() << '\n' << to_json(rep).dump() << '\n';
  }
  if (!o.quiet) {
    out << std::setprecision(12) << "n = " << rep.n << ", adaptations m = " << rep.m << "\nlhs = " << rep.lhs
        << "\nM_n = " << rep.M_n << ", R_m = " << rep.R_m << ", g_n = " << rep.g_n << "\nM_n + R_m + g_n = "
        << rep.total() << ", per-step form = " << rep.general_total() << "\nidentity residual = "
        << rep.identity_residual << " (relative " << rel << ")\nwithin-window adaptation terms = "
        << rep.nonzero_within_window_terms << '\n';
    if (ra) {
      out << "|R_m| = " << std::abs(ra->value) << " <= " << ra->bound << (ra->ok ? "  ok" : "  VIOLATED") << '\n';
      out << "max |Delta_j| = " << ma->max_abs_delta << " <= " << ma->bound << (ma->ok ? "  ok" : "  VIOLATED")
          << '\n';
    } else {
      out << "visited kernels do not contract within ell_max, bounds skipped\n";
    }
  }
  return ok ? exit_ok : exit_audit;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Adaptive increasingly rare MCMC: simulation, exact analysis and studies", "air"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all");

  auto common = [&](CLI::App* sub, bool with_config) {
    if (with_config) sub->add_option("--config", o.config, "config file (sectioned key = value)");
    sub->add_option("--out", o.out_dir, "output directory");
    sub->add_option("--seed", o.seed, "master seed override");
    sub->add_option("--beta", o.beta, "beta override");
    sub->add_option("--epsilon", o.epsilon, "rate epsilon override");
    sub->add_option("--replications", o.replications, "replication count override");
    sub->add_option("--horizon", o.horizon, "horizon N override");
    sub->add_flag("--quiet", o.quiet, "suppress text output and warnings");
    sub->add_option("--workers", o.workers, "worker threads (default: hardware concurrency)");
  };

  auto* run = app.add_subcommand("run", "simulate one AIR chain");
  common(run, true);
  auto* rep = app.add_subcommand("replicate", "replication study, JSON lines output");
  common(rep, true);
  auto* ana = app.add_subcommand("analyze", "exact analysis audits over a kernel file or the two-state family");
  ana->add_option("--kernel", o.kernel, "built-in kernel (twostate)");
  ana->add_option("--gamma", o.gammas, "two-state parameter(s)");
  ana->add_option("--kernel-file", o.kernel_file, "matrices file");
  ana->add_option("--f", o.f, "integrand values (default: indicator of state 0)");
  ana->add_flag("--quiet", o.quiet, "suppress warnings");
  auto* dec = app.add_subcommand("decompose", "replay a stored trajectory through the martingale decomposition");
  common(dec, true);
  dec->add_option("--trajectory", o.trajectory, "trajectory CSV written by run");
  auto* sch = app.add_subcommand("schedule", "adaptation times and envelope checks");
  sch->add_option("--beta", o.beta, "beta (default 1)");
  sch->add_option("--m", o.m, "number of windows (default 10)");
  auto* cex = app.add_subcommand("counterexample", "two-state non-convergent AIR study");
  common(cex, true);
  auto* swp = app.add_subcommand("sweep", "admissibility sweep over beta and epsilon with measured tails");
  common(swp, true);
  swp->add_option("--p", o.p, "moment order (0 = none)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return exit_config;
  }

  WarningHandler previous;
  const bool quiet = o.quiet;
  if (quiet) previous = set_warning_handler([](std::string_view) {});
  struct Restore {
    bool active;
    WarningHandler handler;
    ~Restore() {
      if (active) set_warning_handler(std::move(handler));
    }
  } restore{quiet, previous};

  try {
    if (*run) return cmd_run(o, out);
    if (*rep) return cmd_replicate(o, out);
    if (*ana) return cmd_analyze(o, out);
    if (*dec) return cmd_decompose(o, out);
    if (*sch) return cmd_schedule(o, out);
    if (*cex) return cmd_counterexample(o, out);
    if (*swp) return cmd_sweep(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const AuditFailure& e) {
    err << "audit failure: " << e.what() << '\n';
    return exit_audit;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_runtime;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, out, err);
}

}  // namespace air
