#include "csc/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "csc/config.hpp"
#include "csc/csv.hpp"
#include "csc/solution_io.hpp"
#include "csc/validate.hpp"
#include "csc/version.hpp"

namespace csc {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

struct Options
{
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs{1};
  std::string solution;
  std::string param;
  std::string values;
};

void write_file(const fs::path & path, const std::string & text)
{
  std::ofstream f(path, std::ios::binary);
  if (!f) { throw std::runtime_error("cannot write '" + path.string() + "'"); }
  f << text;
  if (!f) { throw std::runtime_error("write failed for '" + path.string() + "'"); }
}

fs::path prepare_out(const std::string & out)
{
  const fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) { throw std::runtime_error("cannot create output directory '" + out + "': " + ec.message()); }
  return dir;
}

Config load(const Options & o, bool lenient = false)
{
  Config cfg = load_config(o.config, o.seed, lenient);
  cfg.solver.jobs = o.jobs;
  cfg.sim.jobs = o.jobs;
  return cfg;
}

void write_manifest(const fs::path & dir, const Config & cfg, const Options & o, const std::string & command)
{
  std::vector<std::pair<std::string, std::string>> record{
    {"tool_version", kToolVersion},
    {"command", command},
    {"config_path", o.config},
    {"output_dir", o.out},
  };
  if (!o.solution.empty()) { record.emplace_back("solution_path", o.solution); }
  if (!o.param.empty()) { record.emplace_back("param", o.param); }
  if (!o.values.empty()) { record.emplace_back("values", o.values); }
  write_file(dir / "manifest.toml", render_manifest(cfg, record));
}

std::vector<double> parse_values(const std::string & text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) { throw UsageError("--values: empty entry in '" + text + "'"); }
    const std::string t = item.substr(b, e - b + 1);
    double v = 0.0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) { throw UsageError("--values: cannot parse '" + t + "'"); }
    out.push_back(v);
  }
  if (out.empty()) { throw UsageError("--values: no values given"); }
  return out;
}

void print_solution(std::ostream & out, const CodesignSolution & s)
{
  out << "status: " << to_string(s.status) << "\n";
  out << "W_u = " << format_number(s.resources.W_u) << " Hz, W_d = " << format_number(s.resources.W_d) << " Hz\n";
  out << "eps_u = " << format_number(s.resources.eps_u) << ", eps_d = " << format_number(s.resources.eps_d)
      << ", eps_c = " << format_number(s.derived.eps_c) << "\n";
  out << "D_c_max = " << format_number(s.derived.D_c_max) << " s, J = " << format_number(s.cost_J) << "\n";
  out << "residuals (<= 0 satisfied):\n";
  for (const char * name : kResidualNames) {
    if (auto it = s.residuals.find(name); it != s.residuals.end()) {
      out << "  " << std::left << std::setw(18) << name << " " << format_number(it->second) << "\n";
    }
  }
}

int cmd_solve(const Options & o, std::ostream & out)
{
  const Config cfg = load(o);
  const fs::path dir = prepare_out(o.out);
  write_manifest(dir, cfg, o, "solve");
  const CodesignSolution sol = solve(cfg.problem, cfg.solver);
  write_solution(dir / "solution.json", sol);
  print_solution(out, sol);
  out << "wrote " << (dir / "solution.json").string() << "\n";
  return kExitOk;
}

int cmd_simulate(const Options & o, std::ostream & out, std::ostream & err)
{
  if (o.solution.empty()) { throw UsageError("simulate: --solution is required"); }
  const Config cfg = load(o);
  CodesignSolution sol = read_solution(o.solution);
  if (sol.gains.horizon() != cfg.problem.horizon) {
    throw SolutionFormatError("solution has " + std::to_string(sol.gains.horizon()) + " gains but the config horizon N is " +
                              std::to_string(cfg.problem.horizon));
  }
  const fs::path dir = prepare_out(o.out);
  write_manifest(dir, cfg, o, "simulate");
  SimConfig sim = cfg.sim;
  if (sol.status != SolveStatus::converged) {
    err << "warning: simulating a solution with status '" << to_string(sol.status) << "'\n";
    sim.allow_unconverged = true;
  }
  auto mc = monte_carlo(cfg.problem, sol, sim);
  mc.summary.param = "none";
  {
    std::ofstream f(dir / "trajectories.csv", std::ios::binary);
    write_trajectory_csv(f, mc.runs);
  }
  {
    std::ofstream f(dir / "summary.csv", std::ios::binary);
    write_summary_csv(f, {mc.summary});
  }
  out << "runs: " << sim.n_runs << ", settling " << format_number(mc.summary.settling_time_s.mean) << " s, jitter "
      << format_number(mc.summary.jitter_rms_m.mean) << " m, loss rate " << format_number(mc.summary.loss_rate) << "\n";
  out << "wrote " << (dir / "trajectories.csv").string() << " and summary.csv\n";
  return kExitOk;
}

int cmd_sweep(const Options & o, std::ostream & out)
{
  bool known = false;
  for (const char * p : kSweepParams) { known = known || o.param == p; }
  if (!known) { throw UsageError("unknown sweep parameter '" + o.param + "'; valid: " + valid_sweep_params()); }
  const std::vector<double> values = parse_values(o.values);
  const Config cfg = load(o);
  const fs::path dir = prepare_out(o.out);
  write_manifest(dir, cfg, o, "sweep");

  const SweepResult res = sweep(cfg.problem, o.param, values, cfg.sim, cfg.solver);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const fs::path sub = dir / (o.param + "_" + format_number(values[i]));
    fs::create_directories(sub);
    write_solution(sub / "solution.json", res.solutions[i]);
    std::ofstream f(sub / "trajectories.csv", std::ios::binary);
    write_trajectory_csv(f, res.trajectories[i]);
    const auto & r = res.rows[i];
    out << o.param << " = " << format_number(values[i]) << ": " << to_string(r.status) << ", settling "
        << format_number(r.settling_time_s.mean) << " s, jitter " << format_number(r.jitter_rms_m.mean) << " m, loss "
        << format_number(r.loss_rate) << "\n";
  }
  std::ofstream f(dir / "summary.csv", std::ios::binary);
  write_summary_csv(f, res.rows);
  out << "wrote " << (dir / "summary.csv").string() << "\n";
  return kExitOk;
}

int cmd_validate(const Options & o, std::ostream & out)
{
  const Config cfg = load(o, true);
  std::optional<fs::path> dir;
  if (!o.out.empty()) {
    dir = prepare_out(o.out);
    write_manifest(*dir, cfg, o, "validate");
  }
  const auto results = run_validation(cfg.problem, cfg.seed);
  bool all = true;
  for (const auto & r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  if (dir) { write_file(*dir / "validation.json", validation_json(results)); }
  return all ? kExitOk : kExitValidation;
}

}  // namespace

int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err)
{
  CLI::App app{"Co-design and simulation of a wireless closed control loop", "csc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  Options o;

  const auto common = [&o](CLI::App * sub, bool out_required) {
    sub->add_option("--config", o.config, "config file (TOML subset)")->required()->check(CLI::ExistingFile);
    auto * opt = sub->add_option("--out", o.out, "output directory");
    if (out_required) { opt->required(); }
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("--jobs", o.jobs, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
  };
  auto * solve_cmd = app.add_subcommand("solve", "solve the co-design problem and write solution.json");
  common(solve_cmd, true);
  auto * sim_cmd = app.add_subcommand("simulate", "Monte Carlo replay of a solution");
  common(sim_cmd, true);
  sim_cmd->add_option("--solution", o.solution, "solution.json from `solve`")->required();
  auto * sweep_cmd = app.add_subcommand("sweep", "solve and simulate once per parameter value");
  common(sweep_cmd, true);
  sweep_cmd->add_option("--param", o.param, "k_s | W_0 | D_0")->required();
  sweep_cmd->add_option("--values", o.values, "comma-separated values")->required();
  auto * validate_cmd = app.add_subcommand("validate", "run the property checks on the configured problem");
  common(validate_cmd, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (solve_cmd->parsed()) { return cmd_solve(o, out); }
    if (sim_cmd->parsed()) { return cmd_simulate(o, out, err); }
    if (sweep_cmd->parsed()) { return cmd_sweep(o, out); }
    if (validate_cmd->parsed()) { return cmd_validate(o, out); }
  } catch (const UsageError & e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError & e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const SolutionFormatError & e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception & e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}

}  // namespace csc
