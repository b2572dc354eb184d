#pragma once

/**
 * @file
 * @brief Joint choice of bandwidth split, loss targets and gain schedule.
 *
 * minimize   J = sum_{t=1}^{N-1} (X_t' P X_t + R_w U_t^2) + X_N' S X_N
 * over       K_1..K_N, W_u, W_d, eps_u, eps_d
 * subject to C_u >= lambda_u, C_d >= lambda_d, D_c_max <= D_0,
 *            (1 - eps_c) F1(X_t, K_t) <= F2(X_t) along the expected rollout,
 *            0 <= W_u + W_d <= W_0, 0 <= eps_c <= 1,
 *            X_{t+1} = A~ X_t + (1 - eps_c) B~ K_t X_t, X_1 = X_ini.
 *
 * The solver is two-level. The outer level grids the resource variables and
 * refines the best feasible point by coordinate descent. The inner level fixes
 * eps_c and runs gradient descent on the gain schedule (analytic adjoint
 * gradients), with the stability inequality as an exterior quadratic penalty.
 */

#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "estimation.hpp"
#include "plant.hpp"
#include "qos.hpp"

namespace csc {

struct CodesignProblem
{
  PlantModel<double> plant{build_plant(0.125, 0.05)};
  StabilityWeights weights;
  TrafficModel traffic;
  SensingConfig sensing{10, 1.5, 0.05, 1000.0};
  LinkConfig link_u{1e6, 20.0, 200, 1e-3, 1e-3};  ///< W is overwritten per candidate
  LinkConfig link_d{1e6, 30.0, 200, 2e-3, 2e-3};  ///< W is overwritten per candidate
  SnrModel snr_u{DeterministicSnr{}};
  SnrModel snr_d{DeterministicSnr{}};
  RateMode rate_mode{RateMode::normalized};
  double W_0{1.5e6};
  double D_0{0.15};
  State X_ini{100.0, 0.0, 0.0};
  int horizon{10};

  void validate() const;

  /// sigma^2 / k_s
  double noise_variance() const { return estimation_mse(sensing); }
};

/// Baseline braking problem with the given sensor count, W_0 = 1.5 MHz and
/// D_0 = 150 ms. Terminal weight and Lyapunov matrix are the Riccati solution
/// for (A~, B~, P = I, R_w = 0.01).
CodesignProblem baseline_problem(int k_s);

/// Replace k_s in both the traffic and the sensing model.
CodesignProblem with_k_s(CodesignProblem problem, int k_s);

/// Riccati cost-to-go of the nominal plant under the stage weights P, R_w.
Matrix3<double> riccati_terminal_weight(const PlantModel<double> & plant, const Matrix3<double> & P, double R_w);

struct ResourceAllocation
{
  double W_u{0.0};
  double W_d{0.0};
  double eps_u{0.0};
  double eps_d{0.0};

  double eps_c() const noexcept { return 1.0 - (1.0 - eps_u) * (1.0 - eps_d); }
};

enum class SolveStatus { converged, infeasible, iteration_limit };

std::string to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string & s);

/// Residual keys, in evaluation order.
inline constexpr const char * kResidualNames[] = {
  "capacity_uplink", "capacity_downlink", "cycle_time", "stability", "bandwidth", "loss_box",
};

/**
 * Signed, normalized constraint residuals (<= 0 means satisfied):
 *
 *   capacity_uplink   (lambda_u - C_u) / lambda_u
 *   capacity_downlink (lambda_d - C_d) / max(lambda_d, 1 bit/s)
 *   cycle_time        (D_c_max - D_0) / D_0
 *   stability         max_t [(1 - eps_c) F1 - F2]_t / (1 + X_t' P_L X_t) along the expected rollout
 *   bandwidth         max(W_u + W_d - W_0, -(W_u + W_d)) / W_0
 *   loss_box          max(-eps_c, eps_c - 1)
 */
struct ConstraintReport
{
  std::map<std::string, double> residuals;
  QueueQoS uplink;
  QueueQoS downlink;
  LoopQoS loop;
  double lambda_u{0.0};
  double lambda_d{0.0};
  bool link_infeasible{false};  ///< a link had no positive rate; its residuals are +inf

  double worst() const;
  bool feasible(double tol) const { return worst() <= tol; }
};

struct SolverOptions
{
  int grid_bandwidth{16};       ///< uplink shares of W_0 on the W_u + W_d = W_0 face
  int grid_eps{16};             ///< log-spaced levels per link
  double eps_min{1e-6};
  double eps_max{0.5};
  int refine_iters{50};
  int penalty_rounds{4};
  double penalty_initial{1e3};
  double penalty_growth{10.0};
  int inner_max_iters{2000};
  double inner_grad_tol{1e-9};
  double feas_tol{1e-6};
  double tie_tol{1e-9};         ///< relative cost difference treated as a tie
  bool gradient_check{false};
  bool time_invariant_gains{false};
  bool enforce_stability{true};
  int jobs{1};

  void validate() const;
};

struct SolverStats
{
  int grid_points{0};
  int comms_feasible_points{0};
  int inner_solves{0};
  int refine_moves{0};
  int final_inner_iterations{0};
  double gradient_check_error{std::numeric_limits<double>::quiet_NaN()};
};

struct CodesignSolution
{
  GainSchedule gains;
  ResourceAllocation resources;
  QueueQoS uplink;
  QueueQoS downlink;
  LoopQoS derived;
  double lambda_u{0.0};
  double lambda_d{0.0};
  double cost_J{0.0};
  std::map<std::string, double> residuals;
  bool link_infeasible{false};
  SolveStatus status{SolveStatus::infeasible};
  SolverStats stats;
};

/// Quadratic cost over N states and the N-1 commands preceding the terminal state.
double control_cost(std::span<const State> states, std::span<const double> commands, const StabilityWeights & weights);

/// X_1 = X_ini, X_{t+1} = A~ X_t + (1 - eps_c) B~ K_t X_t; returns N states.
std::vector<State> rollout_expected(const CodesignProblem & problem, const GainSchedule & gains, double eps_c);

/// Commands U_t = K_t X_t for the N-1 states preceding the terminal one.
std::vector<double> rollout_commands(const std::vector<State> & states, const GainSchedule & gains);

/// J of the expected rollout under the schedule.
double rollout_cost(const CodesignProblem & problem, const GainSchedule & gains, double eps_c);

struct ObjectiveGradient
{
  double value{0.0};
  std::vector<Gain> gradient;
};

/// Penalty configuration of the augmented inner objective.
struct PenaltySpec
{
  double weight{0.0};      ///< mu; 0 disables the stability term
  double margin{0.0};      ///< penalize max(0, rho_t + margin)^2
  double cost_scale{1.0};  ///< objective is J / cost_scale + mu * sum(...)
};

/// J and dJ/dK_t by backpropagation through the linear recursion.
ObjectiveGradient cost_gradient(const CodesignProblem & problem, const GainSchedule & gains, double eps_c);

/// Augmented objective J/scale + mu * sum_t max(0, rho_t + margin)^2 and its gradient.
ObjectiveGradient augmented_objective(const CodesignProblem & problem, const GainSchedule & gains, double eps_c,
                                      const PenaltySpec & penalty);

/// Normalized stability residuals rho_t for t = 1..N along the expected rollout.
std::vector<double> stability_residuals(const CodesignProblem & problem, const GainSchedule & gains, double eps_c);

/// Finite-horizon LQ gains for the loss-scaled input matrix (1 - eps_c) B~.
GainSchedule riccati_gains(const CodesignProblem & problem, double eps_c);

struct InnerResult
{
  GainSchedule gains;
  double cost{0.0};
  double stability_residual{0.0};
  int iterations{0};
  bool converged{false};
  /// Augmented objective after every accepted step, per penalty round.
  std::vector<std::vector<double>> objective_trace;
};

/// Minimize J over the gain schedule at fixed eps_c.
InnerResult optimize_gains(const CodesignProblem & problem, double eps_c, const SolverOptions & opts);

ConstraintReport evaluate_constraints(const CodesignProblem & problem, const ResourceAllocation & resources,
                                      const GainSchedule & gains);

inline ConstraintReport evaluate_constraints(const CodesignProblem & problem, const CodesignSolution & candidate)
{
  return evaluate_constraints(problem, candidate.resources, candidate.gains);
}

CodesignSolution solve(const CodesignProblem & problem, const SolverOptions & opts = {});

/// Largest relative mismatch, max_t |g_t - d_t| / max(|g_t|, |d_t|), between
/// the analytic gradient g_t w.r.t. K_t and central differences d_t with step
/// rel_step * max(1, |K|).
double gradient_check(const CodesignProblem & problem, const GainSchedule & gains, double eps_c, const PenaltySpec & penalty,
                      double rel_step = 1e-4);

}  // namespace csc
