#pragma once

/**
 * @file
 * @brief Monte Carlo replay of a co-designed loop.
 *
 * Every `replan_every` steps the sensors observe the true state, the
 * controller fuses the observations and ships N commands computed from the
 * predicted expected rollout. The batch arrives after a random cycle time of
 * d steps; the device then executes the command whose index equals the time
 * elapsed since sensing. Each executed command is lost independently with
 * probability eps_c. When the elapsed index runs past the N shipped commands
 * the device holds with no control input until the next batch arrives.
 */

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codesign.hpp"

namespace csc {

struct SimConfig
{
  int n_runs{100};
  int sim_horizon{300};
  std::uint64_t seed{1};
  double settle_band{2.0};    ///< |delta| threshold (m)
  int replan_every{0};        ///< steps between batches; 0 means N
  double check_time_s{10.0};  ///< time at which |delta| is reported
  bool allow_unconverged{false};
  int jobs{1};

  void validate() const;
};

struct StepRecord
{
  State x_true;
  State x_hat;                    ///< state the executed command was computed from (latest estimate on hold)
  std::optional<double> command;  ///< shipped command at this step; empty on hold
  std::optional<int> eta;         ///< delivery indicator; empty on hold
  int delay_steps{0};             ///< delay of the batch in effect
  double cum_cost{0.0};           ///< sum of X'PX + R_w u^2 up to and including this step
};

struct TrajectoryRecord
{
  std::uint64_t run_id{0};
  double T_d{0.0};
  std::vector<StepRecord> steps;
  State final_state{State::Zero()};  ///< state after the last step
};

struct RunStats
{
  double settling_time_s{0.0};
  bool settled{false};
  double overshoot_m{0.0};
  double jitter_rms_m{0.0};
  double abs_delta_check_m{0.0};
  long deliveries{0};
  long losses{0};
  long holds{0};
};

/// Mean and normal-approximation 95% interval over runs.
struct Interval
{
  double mean{0.0};
  double lo{0.0};
  double hi{0.0};
};

Interval mean_interval(const std::vector<double> & values);

struct SweepRow
{
  std::string param;
  double value{0.0};
  bool feasible{false};
  SolveStatus status{SolveStatus::infeasible};
  double W_u{0.0};
  double W_d{0.0};
  double eps_u{0.0};
  double eps_d{0.0};
  double eps_c{0.0};
  double D_c_max{0.0};
  double cost_J{0.0};
  double worst_residual{0.0};
  int n_runs{0};
  Interval settling_time_s;
  double settled_fraction{0.0};
  Interval overshoot_m;
  Interval jitter_rms_m;
  Interval abs_delta_check_m;
  double loss_rate{0.0};  ///< pooled losses / deliveries
  double loss_se{0.0};    ///< binomial standard error at the solved eps_c
  long deliveries{0};
  double hold_rate{0.0};  ///< hold steps / simulated steps
};

struct MonteCarloResult
{
  std::vector<TrajectoryRecord> runs;
  std::vector<RunStats> stats;
  SweepRow summary;
};

/// Cycle time in steps: D = min(Exp(mean D_c_max / ln(1/eps_c)), D_c_max), d = ceil(D / T_d).
int draw_delay_steps(double D_c_max, double eps_c, double T_d, Engine & engine);

TrajectoryRecord run_closed_loop(const CodesignProblem & problem, const CodesignSolution & solution, const SimConfig & sim,
                                 std::uint64_t run_id);

RunStats run_statistics(const TrajectoryRecord & record, const SimConfig & sim);

MonteCarloResult monte_carlo(const CodesignProblem & problem, const CodesignSolution & solution, const SimConfig & sim);

/// Parameters a sweep may vary.
inline constexpr const char * kSweepParams[] = {"k_s", "W_0", "D_0"};

std::string valid_sweep_params();

/// Copy of `base` with one parameter replaced.
CodesignProblem apply_parameter(const CodesignProblem & base, const std::string & param, double value);

struct SweepResult
{
  std::vector<SweepRow> rows;
  std::vector<CodesignSolution> solutions;
  std::vector<std::vector<TrajectoryRecord>> trajectories;
};

/// Solve and simulate once per value. Unconverged rows are still simulated
/// and flagged infeasible.
SweepResult sweep(const CodesignProblem & base, const std::string & param, const std::vector<double> & values,
                  const SimConfig & sim, const SolverOptions & opts);

}  // namespace csc
