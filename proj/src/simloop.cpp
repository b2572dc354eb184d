#include "csc/simloop.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "csc/parallel.hpp"

namespace csc {

void SimConfig::validate() const
{
  if (n_runs < 1) { throw std::invalid_argument("sim: n_runs must be >= 1"); }
  if (sim_horizon < 1) { throw std::invalid_argument("sim: sim_horizon must be >= 1"); }
  if (!(settle_band > 0.0)) { throw std::invalid_argument("sim: settle_band must be > 0"); }
  if (replan_every < 0) { throw std::invalid_argument("sim: replan_every must be >= 0"); }
  if (!(check_time_s >= 0.0)) { throw std::invalid_argument("sim: check_time_s must be >= 0"); }
  if (jobs < 1) { throw std::invalid_argument("sim: jobs must be >= 1"); }
}

Interval mean_interval(const std::vector<double> & values)
{
  if (values.empty()) { return {}; }
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() == 1) { return {mean, mean, mean}; }
  double ss = 0.0;
  for (double v : values) { ss += (v - mean) * (v - mean); }
  const double half = 1.959963984540054 * std::sqrt(ss / (n - 1.0) / n);
  return {mean, mean - half, mean + half};
}

int draw_delay_steps(double D_c_max, double eps_c, double T_d, Engine & engine)
{
  constexpr int never = INT_MAX / 4;
  if (!std::isfinite(D_c_max)) { return never; }
  double D = D_c_max;
  if (eps_c <= 0.0) {
    D = 0.0;
  } else if (eps_c < 1.0) {
    const double mean = D_c_max / std::log(1.0 / eps_c);
    D = std::min(std::exponential_distribution<double>(1.0 / mean)(engine), D_c_max);
  }
  const double steps = std::ceil(D / T_d);
  return steps >= static_cast<double>(never) ? never : static_cast<int>(steps);
}

namespace {

struct Plan
{
  int start{0};    ///< sensing step
  int arrival{0};  ///< first step at which the batch is usable
  int delay{0};
  std::vector<State> predicted;
  std::vector<double> commands;
  State estimate;
};

}  // namespace

TrajectoryRecord run_closed_loop(const CodesignProblem & problem, const CodesignSolution & solution, const SimConfig & sim,
                                 std::uint64_t run_id)
{
  sim.validate();
  if (solution.status != SolveStatus::converged && !sim.allow_unconverged) {
    throw std::invalid_argument("run_closed_loop: solution status is '" + to_string(solution.status) +
                                "'; set allow_unconverged to simulate it anyway");
  }
  const auto & gains = solution.gains.gains;
  const int n = solution.gains.horizon();
  if (n < 1) { throw std::invalid_argument("run_closed_loop: empty gain schedule"); }
  const int replan = sim.replan_every > 0 ? sim.replan_every : n;
  const double eps_c = solution.derived.eps_c;
  const auto & plant = problem.plant;
  const auto & w = problem.weights;

  Engine sensing_rng = make_engine(sim.seed, run_id, Stream::sensing);
  Engine loss_rng = make_engine(sim.seed, run_id, Stream::loss);
  Engine delay_rng = make_engine(sim.seed, run_id, Stream::delay);
  std::bernoulli_distribution delivered(std::clamp(1.0 - eps_c, 0.0, 1.0));

  TrajectoryRecord rec;
  rec.run_id = run_id;
  rec.T_d = plant.T_d;
  rec.steps.reserve(static_cast<std::size_t>(sim.sim_horizon));

  State x = problem.X_ini;
  State latest_estimate = x;
  std::vector<Plan> in_flight;
  std::optional<Plan> active;
  double cum = 0.0;

  for (int s = 0; s < sim.sim_horizon; ++s) {
    if (s % replan == 0) {
      Plan plan;
      plan.start = s;
      plan.estimate = fuse(sample_observations(x, problem.sensing, sensing_rng));
      plan.predicted.resize(static_cast<std::size_t>(n));
      plan.commands.resize(static_cast<std::size_t>(n));
      State z = plan.estimate;
      for (int j = 0; j < n; ++j) {
        plan.predicted[static_cast<std::size_t>(j)] = z;
        plan.commands[static_cast<std::size_t>(j)] = (gains[static_cast<std::size_t>(j)] * z)(0);
        z = step_expected(plant, z, gains[static_cast<std::size_t>(j)], eps_c);
      }
      plan.delay = draw_delay_steps(solution.derived.D_c_max, eps_c, plant.T_d, delay_rng);
      plan.arrival = s + plan.delay;
      latest_estimate = plan.estimate;
      in_flight.push_back(std::move(plan));
    }
    // The newest batch that has arrived replaces the active one.
    for (auto it = in_flight.begin(); it != in_flight.end();) {
      if (it->arrival <= s) {
        if (!active || it->start > active->start) { active = std::move(*it); }
        it = in_flight.erase(it);
      } else {
        ++it;
      }
    }

    StepRecord r;
    r.x_true = x;
    r.x_hat = latest_estimate;
    double u = 0.0;
    const int idx = active ? s - active->start : n;
    if (active) { r.delay_steps = active->delay; }
    if (idx < n) {
      const auto j = static_cast<std::size_t>(idx);
      r.x_hat = active->predicted[j];
      r.command = active->commands[j];
      r.eta = delivered(loss_rng) ? 1 : 0;
      x = step_stochastic(plant, x, active->predicted[j], gains[j], *r.eta);
      if (*r.eta == 1) { u = *r.command; }
    } else {
      x = plant.A_tilde * x;
    }
    cum += r.x_true.dot(w.P * r.x_true) + w.R_w * u * u;
    r.cum_cost = cum;
    rec.steps.push_back(std::move(r));
  }
  rec.final_state = x;
  return rec;
}

RunStats run_statistics(const TrajectoryRecord & record, const SimConfig & sim)
{
  RunStats st;
  const auto & steps = record.steps;
  if (steps.empty()) { return st; }
  const std::size_t n = steps.size();

  std::size_t settle = n;
  for (std::size_t t = n; t-- > 0;) {
    if (std::abs(steps[t].x_true(0)) > sim.settle_band) { break; }
    settle = t;
  }
  st.settled = settle < n;
  st.settling_time_s = static_cast<double>(settle) * record.T_d;

  const double sign = steps.front().x_true(0) < 0.0 ? -1.0 : 1.0;
  for (const auto & r : steps) { st.overshoot_m = std::max(st.overshoot_m, -sign * r.x_true(0)); }

  const std::size_t from = st.settled ? settle : n - std::max<std::size_t>(1, n / 4);
  double ss = 0.0;
  for (std::size_t t = from; t < n; ++t) { ss += steps[t].x_true(0) * steps[t].x_true(0); }
  st.jitter_rms_m = std::sqrt(ss / static_cast<double>(n - from));

  const auto check = std::min(n - 1, static_cast<std::size_t>(std::llround(sim.check_time_s / record.T_d)));
  st.abs_delta_check_m = std::abs(steps[check].x_true(0));

  for (const auto & r : steps) {
    if (!r.eta) {
      ++st.holds;
      continue;
    }
    ++st.deliveries;
    if (*r.eta == 0) { ++st.losses; }
  }
  return st;
}

MonteCarloResult monte_carlo(const CodesignProblem & problem, const CodesignSolution & solution, const SimConfig & sim)
{
  sim.validate();
  MonteCarloResult out;
  const auto runs = static_cast<std::size_t>(sim.n_runs);
  out.runs.resize(runs);
  out.stats.resize(runs);
  parallel_for(runs, sim.jobs, [&](std::size_t i) {
    out.runs[i] = run_closed_loop(problem, solution, sim, static_cast<std::uint64_t>(i));
    out.stats[i] = run_statistics(out.runs[i], sim);
  });

  SweepRow & row = out.summary;
  row.feasible = solution.status == SolveStatus::converged;
  row.status = solution.status;
  row.W_u = solution.resources.W_u;
  row.W_d = solution.resources.W_d;
  row.eps_u = solution.resources.eps_u;
  row.eps_d = solution.resources.eps_d;
  row.eps_c = solution.derived.eps_c;
  row.D_c_max = solution.derived.D_c_max;
  row.cost_J = solution.cost_J;
  row.worst_residual = -std::numeric_limits<double>::infinity();
  for (const auto & [name, v] : solution.residuals) { row.worst_residual = std::max(row.worst_residual, v); }
  row.n_runs = sim.n_runs;

  std::vector<double> settle, overshoot, jitter, check;
  long losses = 0;
  long holds = 0;
  int settled = 0;
  for (const auto & st : out.stats) {
    settle.push_back(st.settling_time_s);
    overshoot.push_back(st.overshoot_m);
    jitter.push_back(st.jitter_rms_m);
    check.push_back(st.abs_delta_check_m);
    losses += st.losses;
    holds += st.holds;
    row.deliveries += st.deliveries;
    settled += st.settled ? 1 : 0;
  }
  row.settling_time_s = mean_interval(settle);
  row.overshoot_m = mean_interval(overshoot);
  row.jitter_rms_m = mean_interval(jitter);
  row.abs_delta_check_m = mean_interval(check);
  row.settled_fraction = static_cast<double>(settled) / static_cast<double>(sim.n_runs);
  row.loss_rate = row.deliveries > 0 ? static_cast<double>(losses) / static_cast<double>(row.deliveries) : 0.0;
  const double p = std::clamp(row.eps_c, 0.0, 1.0);
  row.loss_se = row.deliveries > 0 ? std::sqrt(p * (1.0 - p) / static_cast<double>(row.deliveries)) : 0.0;
  row.hold_rate = static_cast<double>(holds) / (static_cast<double>(sim.n_runs) * static_cast<double>(sim.sim_horizon));
  return out;
}

std::string valid_sweep_params()
{
  std::string s;
  for (const char * p : kSweepParams) {
    if (!s.empty()) { s += ", "; }
    s += p;
  }
  return s;
}

CodesignProblem apply_parameter(const CodesignProblem & base, const std::string & param, double value)
{
  if (param == "k_s") {
    if (!(value >= 1.0) || value != std::floor(value) || value > 1e9) {
      throw std::invalid_argument("sweep: k_s values must be positive integers");
    }
    return with_k_s(base, static_cast<int>(value));
  }
  CodesignProblem p = base;
  if (param == "W_0") {
    p.W_0 = value;
  } else if (param == "D_0") {
    p.D_0 = value;
  } else {
    throw std::invalid_argument("unknown sweep parameter '" + param + "'; valid: " + valid_sweep_params());
  }
  return p;
}

SweepResult sweep(const CodesignProblem & base, const std::string & param, const std::vector<double> & values,
                  const SimConfig & sim, const SolverOptions & opts)
{
  if (values.empty()) { throw std::invalid_argument("sweep: no values"); }
  std::vector<CodesignProblem> problems;
  problems.reserve(values.size());
  for (double v : values) { problems.push_back(apply_parameter(base, param, v)); }

  SweepResult res;
  SimConfig stress = sim;
  stress.allow_unconverged = true;
  for (std::size_t i = 0; i < values.size(); ++i) {
    res.solutions.push_back(solve(problems[i], opts));
    auto mc = monte_carlo(problems[i], res.solutions.back(), stress);
    mc.summary.param = param;
    mc.summary.value = values[i];
    res.rows.push_back(mc.summary);
    res.trajectories.push_back(std::move(mc.runs));
  }
  return res;
}

}  // namespace csc
