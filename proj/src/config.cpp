#include "air/config.hpp"

#include "air/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace air {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view v, const std::string& key) {
  v = trim(v);
  double out = 0.0;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key, "expected a finite number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t parse_u64(std::string_view v, const std::string& key) {
  v = trim(v);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

long parse_long(std::string_view v, const std::string& key) {
  v = trim(v);
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(key, "expected an integer, got '" + std::string(v) + "'");
  }
  return out;
}

bool parse_bool(std::string_view v, const std::string& key) {
  v = trim(v);
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(key, "expected true or false, got '" + std::string(v) + "'");
}

std::vector<double> parse_list(std::string_view v, const std::string& key) {
  std::vector<double> out;
  v = trim(v);
  if (v.empty()) return out;
  for (;;) {
    const auto comma = v.find(',');
    out.push_back(parse_double(v.substr(0, comma), key));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fmt(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s;
}

struct Field {
  std::function<void(RunConfig&, std::string_view, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Table = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

#define AIR_NUM(expr) \
  Field{[](RunConfig& c, std::string_view v, const std::string& k) { c.expr = parse_double(v, k); }, \
        [](const RunConfig& c) { return fmt(c.expr); }}
#define AIR_U64(expr) \
  Field{[](RunConfig& c, std::string_view v, const std::string& k) { c.expr = parse_u64(v, k); }, \
        [](const RunConfig& c) { return std::to_string(c.expr); }}
#define AIR_LIST(expr) \
  Field{[](RunConfig& c, std::string_view v, const std::string& k) { c.expr = parse_list(v, k); }, \
        [](const RunConfig& c) { return fmt(c.expr); }}
#define AIR_STR(expr) \
  Field{[](RunConfig& c, std::string_view v, const std::string&) { c.expr = std::string(trim(v)); }, \
        [](const RunConfig& c) { return c.expr; }}
#define AIR_BOOL(expr) \
  Field{[](RunConfig& c, std::string_view v, const std::string& k) { c.expr = parse_bool(v, k); }, \
        [](const RunConfig& c) { return std::string(c.expr ? "true" : "false"); }}

const Table& table() {
  static const Table t = {
      {"kernel",
       {{"family", AIR_STR(kernel.family)},
        {"states", AIR_U64(kernel.states)},
        {"alpha", AIR_NUM(kernel.alpha)},
        {"members", AIR_U64(kernel.members)},
        {"family_seed", AIR_U64(kernel.family_seed)},
        {"path", AIR_STR(kernel.path)},
        {"dim", AIR_U64(kernel.dim)},
        {"target", AIR_STR(kernel.target)},
        {"mixture_weights", AIR_LIST(kernel.mixture_weights)},
        {"mixture_means", AIR_LIST(kernel.mixture_means)},
        {"mixture_sds", AIR_LIST(kernel.mixture_sds)},
        {"a1", AIR_NUM(kernel.a1)},
        {"a2", AIR_NUM(kernel.a2)}}},
      {"adaptation",
       {{"rule", AIR_STR(adaptation.rule)},
        {"values", AIR_LIST(adaptation.values)},
        {"cyclic", AIR_BOOL(adaptation.cyclic)},
        {"target_rate", AIR_NUM(adaptation.target_rate)},
        {"gain_exponent", AIR_NUM(adaptation.gain_exponent)},
        {"scale", AIR_NUM(adaptation.scale)},
        {"ridge", AIR_NUM(adaptation.ridge)}}},
      {"chain",
       {{"beta", AIR_NUM(beta)},
        {"y0", AIR_LIST(y0)},
        {"gamma0", AIR_LIST(gamma0)},
        {"horizon", AIR_U64(horizon)}}},
      {"integrand",
       {{"values", AIR_LIST(integrand.values)},
        {"power", Field{[](RunConfig& c, std::string_view v, const std::string& k) {
                          const auto p = parse_u64(v, k);
                          if (p > 64) throw ConfigError(k, "power must be <= 64");
                          c.integrand.power = static_cast<unsigned>(p);
                        },
                        [](const RunConfig& c) { return std::to_string(c.integrand.power); }}},
        {"component", AIR_U64(integrand.component)}}},
      {"rate",
       {{"kind", Field{[](RunConfig& c, std::string_view v, const std::string& k) {
                         v = trim(v);
                         if (v == "sqrt_log") c.rate.kind = RateSpec::Kind::sqrt_log;
                         else if (v == "poly") c.rate.kind = RateSpec::Kind::poly;
                         else throw ConfigError(k, "unknown rate kind '" + std::string(v) + "'");
                       },
                       [](const RunConfig& c) {
                         return std::string(c.rate.kind == RateSpec::Kind::poly ? "poly" : "sqrt_log");
                       }}},
        {"epsilon", AIR_NUM(rate.epsilon)},
        {"n_min", AIR_U64(rate.n_min)}}},
      {"study",
       {{"replications", AIR_U64(replications)},
        {"seed", AIR_U64(seed)},
        {"rho", AIR_NUM(rho)},
        {"threshold", AIR_NUM(threshold)}}},
      {"sweep", {{"betas", AIR_LIST(sweep_betas)}, {"epsilons", AIR_LIST(sweep_epsilons)}, {"p", AIR_NUM(sweep_p)}}},
      {"analysis",
       {{"ell_max", Field{[](RunConfig& c, std::string_view v, const std::string& k) { c.ell_max = parse_long(v, k); },
                          [](const RunConfig& c) { return std::to_string(c.ell_max); }}},
        {"probes", AIR_U64(probes)},
        {"q_grid", AIR_LIST(q_grid)}}},
  };
  return t;
}

#undef AIR_NUM
#undef AIR_U64
#undef AIR_LIST
#undef AIR_STR
#undef AIR_BOOL

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [name, fields] : table()) {
    if (name != section) continue;
    for (const auto& [k, f] : fields) {
      if (k == key) return &f;
    }
  }
  return nullptr;
}

bool known_section(const std::string& section) {
  for (const auto& [name, fields] : table()) {
    if (name == section) return true;
  }
  return false;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section)) throw ConfigError(section, "unknown section");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    std::string_view value = trim(line.substr(eq + 1));
    if (const auto hash = value.find(" #"); hash != std::string_view::npos) value = trim(value.substr(0, hash));
    if (section.empty()) throw ConfigError(key, "key outside any section");
    const std::string path = section + "." + key;
    const Field* field = find_field(section, key);
    if (!field) throw ConfigError(path, "unknown key");
    if (!seen.insert(path).second) throw ConfigError(path, "duplicate key");
    field->set(config, value, path);
  }
  for (const char* required : {"kernel.family", "adaptation.rule", "chain.beta", "chain.horizon"}) {
    if (!seen.count(required)) throw ConfigError(required, "missing required key");
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialise(const RunConfig& config) {
  std::string out;
  for (const auto& [section, fields] : table()) {
    if (!out.empty()) out += "\n";
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields) out += key + " = " + field.get(config) + "\n";
  }
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialise(config)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace air
