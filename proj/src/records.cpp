#include "air/records.hpp"

#include "air/config.hpp"
#include "air/errors.hpp"

#include <charconv>
#include <map>
#include <ostream>
#include <sstream>

namespace air {

Json manifest_record(const std::string& kind, const RunConfig& config, std::uint64_t seed) {
  Json j;
  j["record"] = "manifest";
  j["kind"] = kind;
  j["artifact"] = artifact_name;
  j["version"] = artifact_version;
  j["config_hash"] = config_hash(config);
  j["seed"] = seed;
  j["config"] = serialise(config);
  return j;
}

Json to_json(const Parameter& p) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p(i));
  return a;
}

Json to_json(const RateDiagnostics& d) {
  Json j;
  j["n_min"] = d.n_min;
  j["c_hat"] = d.c_hat;
  j["tail_value"] = d.tail_value;
  j["checkpoints"] = d.checkpoints;
  j["normalized"] = d.normalized;
  j["bound_form"] = d.bound_form;
  return j;
}

Json to_json(const WindowLogEntry& w) {
  Json j;
  j["record"] = "window";
  j["m"] = w.m;
  j["time"] = w.time;
  j["parameter"] = to_json(w.parameter);
  j["acceptance_rate"] = w.acceptance_rate;
  return j;
}

Json to_json(const ReplicationRecord& r) {
  Json j;
  j["record"] = "replication";
  j["index"] = r.index;
  j["seed"] = r.seed;
  j["c_hat"] = r.c_hat;
  j["tail_value"] = r.tail_value;
  j["mean_f"] = r.mean_f;
  j["stuck"] = r.stuck;
  j["acceptance_rate"] = r.acceptance_rate;
  j["adaptations"] = r.adaptations;
  j["waning_final"] = r.waning_final;
  j["waning_decreasing"] = r.waning_decreasing;
  j["final_parameter"] = to_json(r.final_parameter);
  return j;
}

Json to_json(const StudySummary& s) {
  Json j;
  j["record"] = "summary";
  j["replications"] = s.replications;
  j["horizon"] = s.horizon;
  j["nu_f"] = s.nu_f;
  j["c_hat_median"] = s.c_hat_median;
  j["c_hat_q05"] = s.c_hat_q05;
  j["c_hat_q95"] = s.c_hat_q95;
  j["abs_tail_median"] = s.abs_tail_median;
  j["threshold"] = s.threshold;
  j["fraction_below_threshold"] = s.fraction_below_threshold;
  j["mean_f"] = s.mean_f;
  j["mean_f_se"] = s.mean_f_se;
  j["lln_z"] = s.lln_z;
  j["lln_failure"] = s.lln_failure;
  j["stuck_fraction"] = s.stuck_fraction;
  j["stuck_se"] = s.stuck_se;
  if (s.counterexample) {
    j["stay_probability"] = s.stay_probability;
    j["theta"] = s.theta;
    j["stuck_z"] = s.stuck_z;
  }
  j["waning_decreasing_fraction"] = s.waning_decreasing_fraction;
  return j;
}

Json to_json(const SweepRow& row) {
  Json j;
  j["record"] = "sweep_cell";
  j["beta"] = row.beta;
  j["epsilon"] = row.epsilon;
  j["large_beta"] = row.t_large_beta;
  j["small_beta"] = row.t_small_beta;
  j["lyapunov"] = row.t_lyapunov;
  j["lyapunov_threshold"] = row.lyapunov_threshold;
  j["waning"] = row.t_waning;
  j["measured"] = row.measured;
  if (row.measured) {
    j["rate"] = row.rate;
    j["abs_tail_median"] = row.abs_tail_median;
    j["fraction_below_threshold"] = row.fraction_below_threshold;
    j["waning_final_median"] = row.waning_final_median;
  }
  return j;
}

Json to_json(const DecompositionReport& r) {
  Json j;
  j["record"] = "decomposition";
  j["n"] = r.n;
  j["m"] = r.m;
  j["lhs"] = r.lhs;
  j["M_n"] = r.M_n;
  j["R_m"] = r.R_m;
  j["g_n"] = r.g_n;
  j["total"] = r.total();
  j["general_total"] = r.general_total();
  j["identity_residual"] = r.identity_residual;
  j["max_abs_delta"] = r.max_abs_delta;
  j["sum_sq_delta"] = r.sum_sq_delta;
  j["nonzero_within_window_terms"] = r.nonzero_within_window_terms;
  j["estimate_mode"] = r.estimate_mode;
  if (r.estimate_mode) j["truncation_bound"] = r.truncation_bound;
  return j;
}

std::string summary_line(const Study& study) { return to_json(study.summary).dump(); }

void write_study(std::ostream& out, const Study& study) {
  out << manifest_record("study", study.config, study.config.seed).dump() << '\n';
  for (const auto& r : study.records) out << to_json(r).dump() << '\n';
  out << summary_line(study) << '\n';
  if (study.failed) {
    Json j;
    j["record"] = "failure";
    j["message"] = study.failure;
    j["completed"] = study.records.size();
    out << j.dump() << '\n';
  }
}

void write_run(std::ostream& out, const RunConfig& config, std::uint64_t seed, const RunResult& result) {
  out << manifest_record("run", config, seed).dump() << '\n';
  for (const auto& w : result.windows) out << to_json(w).dump() << '\n';
  Json j;
  j["record"] = "diagnostics";
  j.update(to_json(result.diagnostics));
  j["mean_f"] = result.mean_f;
  j["stayed_at_start"] = result.stayed_at_start;
  j["acceptance_rate"] = result.acceptance_rate;
  out << j.dump() << '\n';
}

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw DomainError("trajectory line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto p = s.find(sep);
    out.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return out;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const RunConfig& config, std::uint64_t seed,
                          const RecordedTrajectory& t) {
  out << "# " << manifest_record("trajectory", config, seed).dump() << '\n';
  const std::size_t d = t.states.empty() ? 1 : t.states.front().size();
  out << "step";
  for (std::size_t i = 0; i < d; ++i) out << ",x" << i;
  out << ",phi,window,param,f\n";
  for (std::size_t n = 0; n < t.states.size(); ++n) {
    out << n;
    for (double x : t.states[n]) out << ',' << fmt(x);
    out << ",0," << t.windows[n] << ',';
    const Parameter& p = t.params[t.param_ids[n]];
    for (Eigen::Index i = 0; i < p.size(); ++i) out << (i ? ";" : "") << fmt(p(i));
    out << ',' << fmt(t.f_values[n]) << '\n';
  }
}

RecordedTrajectory read_trajectory_csv(std::istream& in) {
  RecordedTrajectory t;
  std::map<std::vector<double>, std::size_t> ids;
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto cols = split(line, ',');
    if (!header) {
      if (cols.size() < 6 || cols.front() != "step") throw DomainError("trajectory: missing header");
      dim = cols.size() - 5;
      header = true;
      continue;
    }
    if (cols.size() != dim + 5) throw DomainError("trajectory line " + std::to_string(line_no) + ": wrong column count");
    if (parse(cols[0], line_no) != static_cast<double>(t.states.size())) {
      throw DomainError("trajectory line " + std::to_string(line_no) + ": steps must be consecutive from 0");
    }
    std::vector<double> x;
    for (std::size_t i = 0; i < dim; ++i) x.push_back(parse(cols[1 + i], line_no));
    t.states.push_back(std::move(x));
    t.windows.push_back(static_cast<std::uint64_t>(parse(cols[dim + 2], line_no)));
    std::vector<double> p;
    for (auto part : split(cols[dim + 3], ';')) p.push_back(parse(part, line_no));
    auto [it, inserted] = ids.try_emplace(p, t.params.size());
    if (inserted) t.params.push_back(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size())));
    t.param_ids.push_back(it->second);
    t.f_values.push_back(parse(cols[dim + 4], line_no));
  }
  if (!header) throw DomainError("trajectory: missing header");
  return t;
}

}  // namespace air
