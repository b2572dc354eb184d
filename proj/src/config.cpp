#include "csc/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

#include "csc/csv.hpp"

namespace csc {

namespace {

struct KeySpec
{
  const char * key;      ///< "section.name" or "name"
  const char * fallback; ///< default value as TOML text; nullptr when required
};

// Schema order is also manifest order.
constexpr KeySpec kSchema[] = {
  {"k_s", nullptr},
  {"sigma", "1.5"},
  {"beta", "1000"},
  {"gamma", "20"},
  {"T_s", "0.05"},
  {"T_d", "0.05"},
  {"varsigma", "0.125"},
  {"N", "10"},
  {"L", "200"},
  {"snr_u", "20"},
  {"snr_d", "30"},
  {"snr_unit", "\"linear\""},
  {"snr_model", "\"deterministic\""},
  {"snr_samples", "10000"},
  {"e_u", "0.001"},
  {"e_d", "0.002"},
  {"theta_u", "0.001"},
  {"theta_d", "0.002"},
  {"W_0_hz", "1.5e6"},
  {"D_0_s", "0.15"},
  {"X_ini", "[100, 0, 0]"},
  {"rate_mode", "\"normalized\""},
  {"seed", "1"},
  {"weights.P", "\"identity\""},
  {"weights.R_w", "0.01"},
  {"weights.S", "\"riccati\""},
  {"weights.lyapunov", "\"terminal\""},
  {"solver.grid_bandwidth", "16"},
  {"solver.grid_eps", "16"},
  {"solver.eps_min", "1e-6"},
  {"solver.eps_max", "0.5"},
  {"solver.refine_iters", "50"},
  {"solver.penalty_rounds", "4"},
  {"solver.penalty_initial", "1000"},
  {"solver.penalty_growth", "10"},
  {"solver.inner_max_iters", "2000"},
  {"solver.inner_grad_tol", "1e-9"},
  {"solver.feas_tol", "1e-6"},
  {"solver.tie_tol", "1e-9"},
  {"solver.gradient_check", "false"},
  {"solver.time_invariant_gains", "false"},
  {"solver.enforce_stability", "true"},
  {"sim.n_runs", "100"},
  {"sim.sim_horizon", "300"},
  {"sim.settle_band", "2"},
  {"sim.replan_every", "0"},
  {"sim.check_time_s", "10"},
};

// The [manifest] section is a record of the run; it is accepted and ignored on input.
constexpr const char * kManifestSection = "manifest.";

class Parser
{
public:
  Parser(std::string_view text, std::string where) : s_(text), where_(std::move(where)) {}

  TomlValue value()
  {
    skip_ws();
    if (pos_ >= s_.size()) { fail("missing value"); }
    const char c = s_[pos_];
    if (c == '"') { return TomlValue{string()}; }
    if (c == '[') { return TomlValue{array()}; }
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return TomlValue{true};
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return TomlValue{false};
    }
    return TomlValue{number()};
  }

  void finish()
  {
    skip_ws();
    if (pos_ != s_.size()) { fail("unexpected trailing text '" + std::string(s_.substr(pos_)) + "'"); }
  }

private:
  [[noreturn]] void fail(const std::string & msg) const { throw ConfigError(where_ + ": " + msg); }

  void skip_ws()
  {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) { ++pos_; }
  }

  std::string string()
  {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) {
        ++pos_;
        const char e = s_[pos_];
        out += e == 'n' ? '\n' : e == 't' ? '\t' : e;
      } else {
        out += s_[pos_];
      }
      ++pos_;
    }
    if (pos_ >= s_.size()) { fail("unterminated string"); }
    ++pos_;
    return out;
  }

  TomlArray array()
  {
    ++pos_;
    TomlArray out;
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    while (true) {
      out.push_back(value());
      skip_ws();
      if (pos_ >= s_.size()) { fail("unterminated array"); }
      if (s_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail("expected ',' or ']' in array");
    }
  }

  double number()
  {
    std::size_t end = pos_;
    while (end < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '.' || s_[end] == '-' ||
                               s_[end] == '+' || s_[end] == '_')) {
      ++end;
    }
    std::string token(s_.substr(pos_, end - pos_));
    token.erase(std::remove(token.begin(), token.end(), '_'), token.end());
    const char * first = token.data();
    if (!token.empty() && token[0] == '+') { ++first; }
    double v = 0.0;
    const auto res = std::from_chars(first, token.data() + token.size(), v);
    if (token.empty() || res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
      fail("cannot parse value '" + std::string(s_.substr(pos_, end - pos_)) + "'");
    }
    pos_ = end;
    return v;
  }

  std::string_view s_;
  std::string where_;
  std::size_t pos_{0};
};

std::string strip_comment(const std::string & line)
{
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) { in_string = !in_string; }
    if (line[i] == '#' && !in_string) { return line.substr(0, i); }
  }
  return line;
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) { return {}; }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

int bracket_depth(const std::string & s)
{
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) { in_string = !in_string; }
    if (in_string) { continue; }
    depth += s[i] == '[' ? 1 : s[i] == ']' ? -1 : 0;
  }
  return depth;
}

bool valid_name(const std::string & s)
{
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

const char * kind_name(const TomlValue & v)
{
  switch (v.v.index()) {
    case 0: return "number";
    case 1: return "boolean";
    case 2: return "string";
    default: return "array";
  }
}

/// Typed access to the resolved key set.
class Resolved
{
public:
  explicit Resolved(const std::map<std::string, TomlValue> & values) : values_(values) {}

  const TomlValue & raw(const std::string & key) const { return values_.at(key); }

  double number(const std::string & key) const
  {
    const auto & v = raw(key);
    if (const auto * d = std::get_if<double>(&v.v)) { return *d; }
    throw ConfigError("config: '" + key + "' must be a number, got " + kind_name(v));
  }

  int integer(const std::string & key) const
  {
    const double d = number(key);
    if (d != std::floor(d) || std::abs(d) > 2e9) { throw ConfigError("config: '" + key + "' must be an integer"); }
    return static_cast<int>(d);
  }

  std::uint64_t seed(const std::string & key) const
  {
    const double d = number(key);
    if (d != std::floor(d) || d < 0.0 || d > 9007199254740992.0) {
      throw ConfigError("config: '" + key + "' must be a nonnegative integer below 2^53");
    }
    return static_cast<std::uint64_t>(d);
  }

  bool boolean(const std::string & key) const
  {
    const auto & v = raw(key);
    if (const auto * b = std::get_if<bool>(&v.v)) { return *b; }
    throw ConfigError("config: '" + key + "' must be true or false, got " + kind_name(v));
  }

  std::string string(const std::string & key) const
  {
    const auto & v = raw(key);
    if (const auto * s = std::get_if<std::string>(&v.v)) { return *s; }
    throw ConfigError("config: '" + key + "' must be a string, got " + kind_name(v));
  }

  bool is_string(const std::string & key) const { return std::holds_alternative<std::string>(raw(key).v); }

  std::string choice(const std::string & key, std::initializer_list<const char *> options) const
  {
    const std::string s = string(key);
    std::string list;
    for (const char * o : options) {
      if (s == o) { return s; }
      list += list.empty() ? "" : ", ";
      list += o;
    }
    throw ConfigError("config: '" + key + "' = \"" + s + "\" is not one of: " + list);
  }

  std::vector<double> numbers(const TomlValue & v, const std::string & key, std::size_t n) const
  {
    const auto * a = std::get_if<TomlArray>(&v.v);
    if (!a || a->size() != n) { throw ConfigError("config: '" + key + "' must be an array of " + std::to_string(n) + " numbers"); }
    std::vector<double> out;
    for (const auto & e : *a) {
      const auto * d = std::get_if<double>(&e.v);
      if (!d) { throw ConfigError("config: '" + key + "' must contain only numbers"); }
      out.push_back(*d);
    }
    return out;
  }

  State vec3(const std::string & key) const
  {
    const auto v = numbers(raw(key), key, 3);
    return State(v[0], v[1], v[2]);
  }

  Matrix3<double> mat3(const std::string & key) const
  {
    const auto * rows = std::get_if<TomlArray>(&raw(key).v);
    if (!rows || rows->size() != 3) { throw ConfigError("config: '" + key + "' must be a 3x3 array of arrays"); }
    Matrix3<double> m;
    for (int i = 0; i < 3; ++i) {
      const auto r = numbers((*rows)[static_cast<std::size_t>(i)], key, 3);
      for (int j = 0; j < 3; ++j) { m(i, j) = r[static_cast<std::size_t>(j)]; }
    }
    return m;
  }

private:
  const std::map<std::string, TomlValue> & values_;
};

void build(Config & cfg, const Resolved & r, bool lenient)
{
  const int k_s = r.integer("k_s");
  const double sigma = r.number("sigma");
  const double beta = r.number("beta");
  const double T_s = r.number("T_s");
  if (!(sigma >= 0.0)) { throw ConfigError("config: 'sigma' must be >= 0"); }
  if (k_s < 1) { throw ConfigError("config: 'k_s' must be >= 1"); }
  if (!(T_s > 0.0)) { throw ConfigError("config: 'T_s' must be > 0"); }
  if (!(beta > 0.0)) { throw ConfigError("config: 'beta' must be > 0"); }

  cfg.seed = r.seed("seed");
  CodesignProblem & p = cfg.problem;
  const double varsigma = r.number("varsigma");
  const double T_d = r.number("T_d");
  if (varsigma == 0.0) { throw ConfigError("config: 'varsigma' must be nonzero (singular engine constant)"); }
  if (!(T_d > 0.0)) { throw ConfigError("config: 'T_d' must be > 0"); }
  p.plant = build_plant(varsigma, T_d);
  p.sensing = SensingConfig(k_s, sigma, T_s, beta);
  p.traffic = TrafficModel{beta, r.number("gamma"), k_s, T_s, r.integer("N")};
  p.horizon = r.integer("N");

  const SnrUnit unit = r.choice("snr_unit", {"linear", "dB"}) == "dB" ? SnrUnit::dB : SnrUnit::linear;
  const int L = r.integer("L");
  p.link_u = LinkConfig{1e6, to_linear_snr(r.number("snr_u"), unit), L, r.number("e_u"), r.number("theta_u")};
  p.link_d = LinkConfig{1e6, to_linear_snr(r.number("snr_d"), unit), L, r.number("e_d"), r.number("theta_d")};
  const auto link_check = [](const LinkConfig & l, const char * dir) {
    try {
      l.validate();
    } catch (const std::invalid_argument & e) {
      throw ConfigError(std::string("config: ") + dir + " " + e.what() + " (keys snr_*, L, e_*, theta_*)");
    }
  };
  link_check(p.link_u, "uplink");
  link_check(p.link_d, "downlink");

  const int samples = r.integer("snr_samples");
  if (r.choice("snr_model", {"deterministic", "rayleigh"}) == "rayleigh") {
    if (samples < 1) { throw ConfigError("config: 'snr_samples' must be >= 1"); }
    p.snr_u = rayleigh_snr(p.link_u.snr, derive_seed(cfg.seed, 0, Stream::snr), static_cast<std::size_t>(samples));
    p.snr_d = rayleigh_snr(p.link_d.snr, derive_seed(cfg.seed, 1, Stream::snr), static_cast<std::size_t>(samples));
  } else {
    p.snr_u = DeterministicSnr{};
    p.snr_d = DeterministicSnr{};
  }
  p.rate_mode = r.choice("rate_mode", {"normalized", "literal"}) == "literal" ? RateMode::literal : RateMode::normalized;
  p.W_0 = r.number("W_0_hz");
  p.D_0 = r.number("D_0_s");
  p.X_ini = r.vec3("X_ini");

  StabilityWeights & w = p.weights;
  if (r.is_string("weights.P")) {
    r.choice("weights.P", {"identity"});
    w.P = Matrix3<double>::Identity();
  } else {
    w.P = r.mat3("weights.P");
  }
  w.R_w = r.number("weights.R_w");
  if (!lenient && !is_positive_semidefinite(w.P)) {
    throw ConfigError("config: 'weights.P' is not symmetric positive semidefinite");
  }
  if (!(w.R_w >= 0.0)) { throw ConfigError("config: 'weights.R_w' must be >= 0"); }
  if (r.is_string("weights.S")) {
    if (r.choice("weights.S", {"riccati", "identity"}) == "riccati") {
      try {
        w.S = riccati_terminal_weight(p.plant, w.P, w.R_w);
      } catch (const std::runtime_error & e) {
        if (!lenient) { throw ConfigError(std::string("config: 'weights.S' = \"riccati\" failed: ") + e.what()); }
        w.S = Matrix3<double>::Identity();
      }
    } else {
      w.S = Matrix3<double>::Identity();
    }
  } else {
    w.S = r.mat3("weights.S");
  }
  if (r.is_string("weights.lyapunov")) {
    const auto c = r.choice("weights.lyapunov", {"terminal", "cost", "identity"});
    w.lyapunov = c == "terminal" ? w.S : c == "cost" ? w.P : Matrix3<double>::Identity();
  } else {
    w.lyapunov = r.mat3("weights.lyapunov");
  }
  const auto psd = [lenient](const Matrix3<double> & m, const char * key) {
    if (!lenient && !is_positive_semidefinite(m)) { throw ConfigError(std::string("config: '") + key + "' is not symmetric positive semidefinite"); }
  };
  psd(w.S, "weights.S");
  psd(w.lyapunov, "weights.lyapunov");

  SolverOptions & o = cfg.solver;
  o.grid_bandwidth = r.integer("solver.grid_bandwidth");
  o.grid_eps = r.integer("solver.grid_eps");
  o.eps_min = r.number("solver.eps_min");
  o.eps_max = r.number("solver.eps_max");
  o.refine_iters = r.integer("solver.refine_iters");
  o.penalty_rounds = r.integer("solver.penalty_rounds");
  o.penalty_initial = r.number("solver.penalty_initial");
  o.penalty_growth = r.number("solver.penalty_growth");
  o.inner_max_iters = r.integer("solver.inner_max_iters");
  o.inner_grad_tol = r.number("solver.inner_grad_tol");
  o.feas_tol = r.number("solver.feas_tol");
  o.tie_tol = r.number("solver.tie_tol");
  o.gradient_check = r.boolean("solver.gradient_check");
  o.time_invariant_gains = r.boolean("solver.time_invariant_gains");
  o.enforce_stability = r.boolean("solver.enforce_stability");

  SimConfig & s = cfg.sim;
  s.n_runs = r.integer("sim.n_runs");
  s.sim_horizon = r.integer("sim.sim_horizon");
  s.settle_band = r.number("sim.settle_band");
  s.replan_every = r.integer("sim.replan_every");
  s.check_time_s = r.number("sim.check_time_s");
  s.seed = cfg.seed;

  try {
    if (lenient) {
      // Weight problems are left for the validation suite to report.
      CodesignProblem copy = p;
      copy.weights = StabilityWeights{};
      copy.validate();
    } else {
      p.validate();
    }
    s.validate();
    o.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace

TomlTable parse_toml(const std::string & text, const std::string & origin)
{
  TomlTable table;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const int start_line = lineno;
    std::string body = trim(strip_comment(line));
    if (body.empty()) { continue; }
    const std::string where = origin + ":" + std::to_string(start_line);
    if (body.front() == '[' && body.find('=') == std::string::npos) {
      if (body.back() != ']') { throw ConfigError(where + ": malformed section header"); }
      section = trim(body.substr(1, body.size() - 2));
      if (!valid_name(section)) { throw ConfigError(where + ": invalid section name '" + section + "'"); }
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) { throw ConfigError(where + ": expected 'key = value'"); }
    const std::string key = trim(body.substr(0, eq));
    if (!valid_name(key)) { throw ConfigError(where + ": invalid key '" + key + "'"); }
    std::string rhs = body.substr(eq + 1);
    while (bracket_depth(rhs) > 0 && std::getline(in, line)) {
      ++lineno;
      rhs += " " + trim(strip_comment(line));
    }
    const std::string full = section.empty() ? key : section + "." + key;
    Parser parser(rhs, where + ": '" + full + "'");
    TomlValue v = parser.value();
    parser.finish();
    if (!table.emplace(full, std::move(v)).second) { throw ConfigError(where + ": duplicate key '" + full + "'"); }
  }
  return table;
}

std::string to_toml(const TomlValue & value)
{
  return std::visit(
    [](const auto & x) -> std::string {
      using T = std::decay_t<decltype(x)>;
      if constexpr (std::is_same_v<T, double>) {
        return format_number(x);
      } else if constexpr (std::is_same_v<T, bool>) {
        return x ? "true" : "false";
      } else if constexpr (std::is_same_v<T, std::string>) {
        std::string out = "\"";
        for (char c : x) {
          if (c == '"' || c == '\\') { out += '\\'; }
          out += c;
        }
        return out + "\"";
      } else {
        std::string out = "[";
        for (std::size_t i = 0; i < x.size(); ++i) { out += (i ? ", " : "") + to_toml(x[i]); }
        return out + "]";
      }
    },
    value.v);
}

Config parse_config(const std::string & text, const std::string & origin, std::optional<std::uint64_t> seed_override,
                    bool lenient_weights)
{
  TomlTable table = parse_toml(text, origin);

  bool strict = false;
  if (auto it = table.find("strict"); it != table.end()) {
    const auto * b = std::get_if<bool>(&it->second.v);
    if (!b) { throw ConfigError(origin + ": 'strict' must be true or false"); }
    strict = *b;
    table.erase(it);
  }
  std::erase_if(table, [](const auto & kv) { return kv.first.rfind(kManifestSection, 0) == 0; });
  if (seed_override) { table["seed"] = TomlValue{static_cast<double>(*seed_override)}; }

  Config cfg;
  std::map<std::string, TomlValue> values;
  for (const auto & spec : kSchema) {
    auto it = table.find(spec.key);
    const bool present = it != table.end();
    if (present) {
      values.emplace(spec.key, it->second);
      table.erase(it);
    } else if (spec.fallback == nullptr) {
      throw ConfigError(origin + ": missing required key '" + spec.key + "'");
    } else if (strict) {
      throw ConfigError(origin + ": missing required key '" + spec.key + "' (strict mode, no defaults)");
    } else {
      Parser p(spec.fallback, "default");
      values.emplace(spec.key, p.value());
    }
    cfg.resolved.emplace_back(spec.key, values.at(spec.key));
    cfg.from_file.push_back(present);
  }
  if (!table.empty()) {
    std::string unknown;
    for (const auto & [k, v] : table) { unknown += (unknown.empty() ? "'" : ", '") + k + "'"; }
    throw ConfigError(origin + ": unknown key(s) " + unknown);
  }

  try {
    build(cfg, Resolved(values), lenient_weights);
  } catch (const ConfigError & e) {
    throw ConfigError(origin + ": " + e.what());
  } catch (const std::invalid_argument & e) {
    throw ConfigError(origin + ": config: " + e.what());
  }
  return cfg;
}

Config load_config(const std::filesystem::path & path, std::optional<std::uint64_t> seed_override, bool lenient_weights)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) { throw ConfigError("cannot read config file '" + path.string() + "'"); }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), seed_override, lenient_weights);
}

std::string render_manifest(const Config & cfg, const std::vector<std::pair<std::string, std::string>> & record)
{
  std::ostringstream os;
  os << "# Run manifest. Re-run with --config pointing at this file.\n";
  os << "strict = true\n";
  std::string section;
  for (std::size_t i = 0; i < cfg.resolved.size(); ++i) {
    const auto & [key, value] = cfg.resolved[i];
    const auto dot = key.find('.');
    const std::string sec = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
    if (sec != section) {
      os << "\n[" << sec << "]\n";
      section = sec;
    }
    os << name << " = " << to_toml(value) << (cfg.from_file[i] ? "  # config\n" : "  # default\n");
  }
  os << "\n[manifest]\n";
  for (const auto & [key, value] : record) { os << key << " = " << to_toml(TomlValue{value}) << "\n"; }
  return os.str();
}

}  // namespace csc
