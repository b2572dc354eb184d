#include "csc/codesign.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "csc/parallel.hpp"

namespace csc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_horizon(const CodesignProblem & problem, const GainSchedule & gains, const char * who)
{
  if (gains.horizon() != problem.horizon) {
    throw std::invalid_argument(std::string(who) + ": gain schedule length " + std::to_string(gains.horizon()) +
                                " does not match horizon " + std::to_string(problem.horizon));
  }
}

double dot(const std::vector<Gain> & a, const std::vector<Gain> & b)
{
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) { s += a[i].dot(b[i]); }
  return s;
}

double max_abs(const std::vector<Gain> & a)
{
  double m = 0.0;
  for (const auto & g : a) { m = std::max(m, g.cwiseAbs().maxCoeff()); }
  return m;
}

// Shared-gain mode: the gradient w.r.t. the common K is the sum over steps.
void tie_gradient(std::vector<Gain> & g)
{
  Gain sum = Gain::Zero();
  for (const auto & row : g) { sum += row; }
  for (auto & row : g) { row = sum; }
}

/// Link-level quantities that depend only on the bandwidth split.
struct LinkEval
{
  double W_u{0.0};
  double W_d{0.0};
  double lambda_u{0.0};
  double lambda_d{kInf};
  double C_u{0.0};
  double C_d{0.0};
  bool up_ok{false};
  bool down_ok{false};
};

LinkEval evaluate_links(const CodesignProblem & problem, double W_u, double W_d)
{
  LinkEval ev;
  ev.W_u = W_u;
  ev.W_d = W_d;
  ev.lambda_u = uplink_arrival_rate(problem.traffic);
  LinkConfig up = problem.link_u;
  LinkConfig down = problem.link_d;
  up.W = W_u;
  down.W = W_d;
  if (W_u > 0.0) {
    try {
      ev.C_u = effective_capacity(up, problem.snr_u, up.theta, problem.rate_mode);
      ev.lambda_d = downlink_arrival_rate(problem.traffic, up.theta, down.theta, up, problem.snr_u, ev.lambda_u,
                                          problem.rate_mode);
      ev.up_ok = ev.C_u > 0.0 && std::isfinite(ev.lambda_d);
    } catch (const LinkInfeasible &) {
      ev.up_ok = false;
    }
  }
  if (W_d > 0.0) {
    try {
      ev.C_d = effective_capacity(down, problem.snr_d, down.theta, problem.rate_mode);
      ev.down_ok = ev.C_d > 0.0;
    } catch (const LinkInfeasible &) {
      ev.down_ok = false;
    }
  }
  return ev;
}

/// Everything in the report except the stability residual.
ConstraintReport comms_report(const CodesignProblem & problem, const LinkEval & ev, double eps_u, double eps_d)
{
  ConstraintReport rep;
  rep.lambda_u = ev.lambda_u;
  rep.lambda_d = ev.lambda_d;
  rep.link_infeasible = !(ev.up_ok && ev.down_ok);
  rep.uplink = QueueQoS{ev.C_u, eps_u, kInf, problem.link_u.theta};
  rep.downlink = QueueQoS{ev.C_d, eps_d, kInf, problem.link_d.theta};
  rep.loop = LoopQoS{kInf, ResourceAllocation{ev.W_u, ev.W_d, eps_u, eps_d}.eps_c()};

  auto & r = rep.residuals;
  r["capacity_uplink"] = ev.up_ok ? (ev.lambda_u - ev.C_u) / ev.lambda_u : kInf;
  r["capacity_downlink"] = (ev.up_ok && ev.down_ok) ? (ev.lambda_d - ev.C_d) / std::max(ev.lambda_d, 1.0) : kInf;

  const bool eps_ok = eps_u > 0.0 && eps_u < 1.0 && eps_d > 0.0 && eps_d < 1.0;
  if (ev.up_ok && ev.down_ok && eps_ok) {
    rep.uplink = make_queue_qos(ev.C_u, eps_u, problem.link_u.theta);
    rep.downlink = make_queue_qos(ev.C_d, eps_d, problem.link_d.theta);
    rep.loop = loop_metrics(rep.uplink, rep.downlink);
    r["cycle_time"] = (rep.loop.D_c_max - problem.D_0) / problem.D_0;
  } else {
    r["cycle_time"] = kInf;
  }
  r["stability"] = 0.0;
  const double W = ev.W_u + ev.W_d;
  r["bandwidth"] = std::max(W - problem.W_0, -W) / problem.W_0;
  r["loss_box"] = std::max(-rep.loop.eps_c, rep.loop.eps_c - 1.0);
  return rep;
}

double comms_worst(const ConstraintReport & rep)
{
  double w = -kInf;
  for (const auto & [name, value] : rep.residuals) {
    if (name == "stability") { continue; }
    w = std::max(w, std::isnan(value) ? kInf : value);
  }
  return w;
}

double max_or(const std::vector<double> & v, double fallback)
{
  return v.empty() ? fallback : *std::max_element(v.begin(), v.end());
}

struct Candidate
{
  ResourceAllocation res;
  double share{0.0};
  double J{kInf};
  double eps_c{1.0};
};

// Lower cost wins; costs within tie_tol are ties, broken by smaller eps_c, then smaller W_u.
bool grid_better(const Candidate & a, const Candidate & b, double tie_tol)
{
  const double scale = std::max({std::abs(a.J), std::abs(b.J), 1e-300});
  if (std::abs(a.J - b.J) > tie_tol * scale) { return a.J < b.J; }
  if (a.eps_c != b.eps_c) { return a.eps_c < b.eps_c; }
  return a.res.W_u < b.res.W_u;
}

// Refinement accepts only real progress: lower cost, or a tie with a visibly smaller eps_c.
bool refine_better(const Candidate & a, const Candidate & b, double tie_tol)
{
  const double scale = std::max({std::abs(a.J), std::abs(b.J), 1e-300});
  if (std::abs(a.J - b.J) > tie_tol * scale) { return a.J < b.J; }
  return a.eps_c < b.eps_c * (1.0 - 1e-9);
}

}  // namespace

void SolverOptions::validate() const
{
  const SolverOptions & o = *this;
  if (o.grid_bandwidth < 1 || o.grid_eps < 1) { throw std::invalid_argument("solver: grid sizes must be >= 1"); }
  if (!(o.eps_min > 0.0 && o.eps_min <= o.eps_max && o.eps_max < 1.0)) {
    throw std::invalid_argument("solver: need 0 < eps_min <= eps_max < 1");
  }
  if (o.refine_iters < 0) { throw std::invalid_argument("solver: refine_iters must be >= 0"); }
  if (o.penalty_rounds < 1) { throw std::invalid_argument("solver: penalty_rounds must be >= 1"); }
  if (!(o.penalty_initial > 0.0) || !(o.penalty_growth >= 1.0)) {
    throw std::invalid_argument("solver: penalty_initial must be > 0 and penalty_growth >= 1");
  }
  if (o.inner_max_iters < 1) { throw std::invalid_argument("solver: inner_max_iters must be >= 1"); }
  if (!(o.inner_grad_tol > 0.0) || !(o.feas_tol >= 0.0) || !(o.tie_tol >= 0.0)) {
    throw std::invalid_argument("solver: tolerances must be nonnegative (inner_grad_tol > 0)");
  }
  if (o.jobs < 1) { throw std::invalid_argument("solver: jobs must be >= 1"); }
}


void CodesignProblem::validate() const
{
  weights.validate();
  traffic.validate();
  link_u.validate();
  link_d.validate();
  if (!(W_0 > 0.0) || !std::isfinite(W_0)) { throw std::invalid_argument("problem: W_0 must be finite and > 0"); }
  if (!(D_0 > 0.0) || !std::isfinite(D_0)) { throw std::invalid_argument("problem: D_0 must be finite and > 0"); }
  if (horizon < 1) { throw std::invalid_argument("problem: horizon N must be >= 1"); }
  if (!X_ini.allFinite()) { throw std::invalid_argument("problem: X_ini must be finite"); }
  if (traffic.k_s != sensing.k_s()) { throw std::invalid_argument("problem: traffic and sensing disagree on k_s"); }
  if (traffic.T_s != sensing.T_s() || traffic.beta != sensing.beta()) {
    throw std::invalid_argument("problem: traffic and sensing disagree on T_s or beta");
  }
  if (!plant.A_tilde.allFinite() || !plant.B_tilde.allFinite()) { throw std::invalid_argument("problem: plant is not finite"); }
}

Matrix3<double> riccati_terminal_weight(const PlantModel<double> & plant, const Matrix3<double> & P, double R_w)
{
  return solve_dare(plant.A_tilde, plant.B_tilde, P, R_w);
}

CodesignProblem baseline_problem(int k_s)
{
  CodesignProblem p;
  p = with_k_s(p, k_s);
  p.weights.S = riccati_terminal_weight(p.plant, p.weights.P, p.weights.R_w);
  p.weights.lyapunov = p.weights.S;
  return p;
}

CodesignProblem with_k_s(CodesignProblem problem, int k_s)
{
  problem.traffic.k_s = k_s;
  problem.sensing = SensingConfig(k_s, problem.sensing.sigma(), problem.sensing.T_s(), problem.sensing.beta());
  return problem;
}

std::string to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

SolveStatus solve_status_from_string(const std::string & s)
{
  if (s == "converged") { return SolveStatus::converged; }
  if (s == "infeasible") { return SolveStatus::infeasible; }
  if (s == "iteration-limit") { return SolveStatus::iteration_limit; }
  throw std::invalid_argument("unknown solve status '" + s + "'");
}

double ConstraintReport::worst() const
{
  double w = -kInf;
  for (const auto & [name, value] : residuals) { w = std::max(w, std::isnan(value) ? kInf : value); }
  return w;
}

double control_cost(std::span<const State> states, std::span<const double> commands, const StabilityWeights & weights)
{
  if (states.empty()) { throw std::invalid_argument("control_cost: no states"); }
  if (commands.size() + 1 != states.size()) {
    throw std::invalid_argument("control_cost: expected " + std::to_string(states.size() - 1) + " commands for " +
                                std::to_string(states.size()) + " states, got " + std::to_string(commands.size()));
  }
  double J = 0.0;
  for (std::size_t t = 0; t + 1 < states.size(); ++t) {
    J += states[t].dot(weights.P * states[t]) + weights.R_w * commands[t] * commands[t];
  }
  J += states.back().dot(weights.S * states.back());
  return J;
}

std::vector<State> rollout_expected(const CodesignProblem & problem, const GainSchedule & gains, double eps_c)
{
  require_horizon(problem, gains, "rollout_expected");
  std::vector<State> x(static_cast<std::size_t>(problem.horizon));
  x[0] = problem.X_ini;
  for (std::size_t t = 0; t + 1 < x.size(); ++t) { x[t + 1] = step_expected(problem.plant, x[t], gains.gains[t], eps_c); }
  return x;
}

std::vector<double> rollout_commands(const std::vector<State> & states, const GainSchedule & gains)
{
  std::vector<double> u;
  if (states.empty()) { return u; }
  u.reserve(states.size() - 1);
  for (std::size_t t = 0; t + 1 < states.size(); ++t) { u.push_back((gains.gains.at(t) * states[t])(0)); }
  return u;
}

double rollout_cost(const CodesignProblem & problem, const GainSchedule & gains, double eps_c)
{
  const auto x = rollout_expected(problem, gains, eps_c);
  const auto u = rollout_commands(x, gains);
  return control_cost(x, u, problem.weights);
}

ObjectiveGradient augmented_objective(const CodesignProblem & problem, const GainSchedule & gains, double eps_c,
                                      const PenaltySpec & penalty)
{
  const auto & p = problem.plant;
  const auto & w = problem.weights;
  const auto & K = gains.gains;
  const auto x = rollout_expected(problem, gains, eps_c);
  const std::size_t n = x.size();
  const double keep = 1.0 - eps_c;
  const double inv_scale = 1.0 / penalty.cost_scale;

  ObjectiveGradient out;
  out.gradient.assign(n, Gain::Zero());
  std::vector<State> pen_dx(n, State::Zero());

  double J = 0.0;
  double pen = 0.0;
  const Matrix3<double> & L = w.lyapunov;
  const Matrix3<double> AtLA = p.A_tilde.transpose() * L * p.A_tilde;
  const double bLb = p.B_tilde.dot(L * p.B_tilde);
  const double noise_var = problem.noise_variance();

  for (std::size_t t = 0; t < n; ++t) {
    if (t + 1 < n) {
      const double u = (K[t] * x[t])(0);
      J += x[t].dot(w.P * x[t]) + w.R_w * u * u;
    } else {
      J += x[t].dot(w.S * x[t]);
    }
    if (penalty.weight <= 0.0) { continue; }

    const auto terms = detail::lyapunov_terms(p, L, x[t], K[t], noise_var);
    const double r = keep * terms.F1 - terms.F2;
    const State Lx = L * x[t];
    const double den = 1.0 + x[t].dot(Lx);
    const double h = r / den + penalty.margin;
    if (h <= 0.0) { continue; }
    pen += h * h;

    const Matrix3<double> closed = p.A_tilde + p.B_tilde * K[t];
    const State Lm = L * (closed * x[t]);
    const Gain dr_dK = keep * (2.0 * p.B_tilde.dot(Lm) * x[t].transpose() + 2.0 * noise_var * bLb * K[t]);
    const State dr_dx = keep * (2.0 * closed.transpose() * Lm - 2.0 * AtLA * x[t]) - (2.0 * Lx - 2.0 * AtLA * x[t]);
    const double coeff = 2.0 * penalty.weight * h;
    out.gradient[t] += coeff * dr_dK / den;
    pen_dx[t] = coeff * (dr_dx / den - (2.0 * r / (den * den)) * Lx);
  }
  out.value = J * inv_scale + penalty.weight * pen;

  // Adjoint sweep: g holds dPhi/dX_{t+1}.
  State g = 2.0 * inv_scale * (w.S * x[n - 1]) + pen_dx[n - 1];
  for (std::size_t t = n - 1; t-- > 0;) {
    const double u = (K[t] * x[t])(0);
    out.gradient[t] += (2.0 * inv_scale * w.R_w * u + keep * p.B_tilde.dot(g)) * x[t].transpose();
    const Matrix3<double> M = p.A_tilde + keep * p.B_tilde * K[t];
    g = 2.0 * inv_scale * (w.P * x[t] + w.R_w * u * K[t].transpose()) + M.transpose() * g + pen_dx[t];
  }
  return out;
}

ObjectiveGradient cost_gradient(const CodesignProblem & problem, const GainSchedule & gains, double eps_c)
{
  return augmented_objective(problem, gains, eps_c, PenaltySpec{});
}

std::vector<double> stability_residuals(const CodesignProblem & problem, const GainSchedule & gains, double eps_c)
{
  const auto x = rollout_expected(problem, gains, eps_c);
  const Matrix3<double> & L = problem.weights.lyapunov;
  const double noise_var = problem.noise_variance();
  std::vector<double> rho;
  rho.reserve(x.size());
  for (std::size_t t = 0; t < x.size(); ++t) {
    const auto terms = detail::lyapunov_terms(problem.plant, L, x[t], gains.gains[t], noise_var);
    rho.push_back(((1.0 - eps_c) * terms.F1 - terms.F2) / (1.0 + x[t].dot(L * x[t])));
  }
  return rho;
}

GainSchedule riccati_gains(const CodesignProblem & problem, double eps_c)
{
  const auto & w = problem.weights;
  const Matrix3<double> & A = problem.plant.A_tilde;
  const State b = (1.0 - eps_c) * problem.plant.B_tilde;
  const auto gain_for = [&](const Matrix3<double> & X) -> Gain {
    const double denom = w.R_w + b.dot(X * b);
    if (!(denom > 0.0)) { return Gain::Zero(); }
    return -(b.transpose() * X * A) / denom;
  };

  const auto n = static_cast<std::size_t>(problem.horizon);
  GainSchedule k = GainSchedule::zeros(problem.horizon);
  Matrix3<double> X = w.S;
  k.gains[n - 1] = gain_for(X);
  for (std::size_t t = n - 1; t-- > 0;) {
    k.gains[t] = gain_for(X);
    const Matrix3<double> closed = A + b * k.gains[t];
    X = w.P + w.R_w * k.gains[t].transpose() * k.gains[t] + closed.transpose() * X * closed;
    X = (X + X.transpose()) / 2.0;
  }
  return k;
}

InnerResult optimize_gains(const CodesignProblem & problem, double eps_c, const SolverOptions & opts)
{
  InnerResult res;
  GainSchedule k = riccati_gains(problem, eps_c);
  if (opts.time_invariant_gains) {
    for (auto & row : k.gains) { row = k.gains.front(); }
  }
  const double J0 = rollout_cost(problem, k, eps_c);
  const double scale = J0 > 1e-12 ? J0 : 1.0;
  const int rounds = opts.enforce_stability ? opts.penalty_rounds : 1;

  bool all_converged = true;
  double mu = opts.enforce_stability ? opts.penalty_initial : 0.0;
  for (int round = 0; round < rounds; ++round, mu *= opts.penalty_growth) {
    const PenaltySpec spec{mu, opts.enforce_stability ? opts.feas_tol : 0.0, scale};
    auto obj = augmented_objective(problem, k, eps_c, spec);
    if (opts.time_invariant_gains) { tie_gradient(obj.gradient); }
    std::vector<double> trace{obj.value};

    double alpha = 1.0 / std::max(std::sqrt(dot(obj.gradient, obj.gradient)), 1e-300);
    bool converged = false;
    for (int it = 0; it < opts.inner_max_iters; ++it) {
      if (max_abs(obj.gradient) <= opts.inner_grad_tol) {
        converged = true;
        break;
      }
      const double g2 = dot(obj.gradient, obj.gradient);
      GainSchedule trial = k;
      ObjectiveGradient next;
      bool accepted = false;
      for (int bt = 0; bt < 60; ++bt) {
        for (std::size_t t = 0; t < trial.gains.size(); ++t) { trial.gains[t] = k.gains[t] - alpha * obj.gradient[t]; }
        next = augmented_objective(problem, trial, eps_c, spec);
        if (std::isfinite(next.value) && next.value <= obj.value - 1e-4 * alpha * g2) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        // No decrease representable at this precision.
        converged = true;
        break;
      }
      if (opts.time_invariant_gains) { tie_gradient(next.gradient); }
      ++res.iterations;

      // Barzilai-Borwein step for the next iteration.
      double ss = 0.0;
      double sy = 0.0;
      for (std::size_t t = 0; t < trial.gains.size(); ++t) {
        const Gain s = trial.gains[t] - k.gains[t];
        const Gain y = next.gradient[t] - obj.gradient[t];
        ss += s.dot(s);
        sy += s.dot(y);
      }
      const double decrease = obj.value - next.value;
      k = std::move(trial);
      obj = std::move(next);
      trace.push_back(obj.value);
      alpha = sy > 0.0 ? ss / sy : 2.0 * alpha;
      if (decrease <= 1e-15 * (1.0 + std::abs(obj.value))) {
        converged = true;
        break;
      }
    }
    all_converged = all_converged && converged;
    res.objective_trace.push_back(std::move(trace));
    if (opts.enforce_stability && max_or(stability_residuals(problem, k, eps_c), -kInf) <= 0.0) { break; }
  }

  res.gains = std::move(k);
  res.cost = rollout_cost(problem, res.gains, eps_c);
  res.stability_residual = opts.enforce_stability ? max_or(stability_residuals(problem, res.gains, eps_c), -kInf) : 0.0;
  res.converged = all_converged;
  return res;
}

ConstraintReport evaluate_constraints(const CodesignProblem & problem, const ResourceAllocation & resources,
                                      const GainSchedule & gains)
{
  const LinkEval ev = evaluate_links(problem, resources.W_u, resources.W_d);
  ConstraintReport rep = comms_report(problem, ev, resources.eps_u, resources.eps_d);
  rep.residuals["stability"] = max_or(stability_residuals(problem, gains, resources.eps_c()), -kInf);
  return rep;
}

double gradient_check(const CodesignProblem & problem, const GainSchedule & gains, double eps_c, const PenaltySpec & penalty,
                      double rel_step)
{
  const auto analytic = augmented_objective(problem, gains, eps_c, penalty);
  double worst = 0.0;
  GainSchedule probe = gains;
  for (std::size_t t = 0; t < gains.gains.size(); ++t) {
    Gain fd;
    for (int j = 0; j < 3; ++j) {
      const double k0 = gains.gains[t](j);
      const double h = rel_step * std::max(1.0, std::abs(k0));
      probe.gains[t](j) = k0 + h;
      const double fp = augmented_objective(problem, probe, eps_c, penalty).value;
      probe.gains[t](j) = k0 - h;
      const double fm = augmented_objective(problem, probe, eps_c, penalty).value;
      probe.gains[t](j) = k0;
      fd(j) = (fp - fm) / (2.0 * h);
    }
    const Gain & an = analytic.gradient[t];
    const double denom = std::max({an.norm(), fd.norm(), 1e-300});
    worst = std::max(worst, (an - fd).norm() / denom);
  }
  return worst;
}

CodesignSolution solve(const CodesignProblem & problem, const SolverOptions & opts)
{
  problem.validate();
  opts.validate();

  const int nb = opts.grid_bandwidth;
  const int ne = opts.grid_eps;
  std::vector<double> shares(static_cast<std::size_t>(nb));
  for (int i = 0; i < nb; ++i) { shares[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) / static_cast<double>(nb + 1); }
  const double log_lo = std::log(opts.eps_min);
  const double log_hi = std::log(opts.eps_max);
  std::vector<double> eps_levels(static_cast<std::size_t>(ne));
  for (int j = 0; j < ne; ++j) {
    eps_levels[static_cast<std::size_t>(j)] =
      ne == 1 ? opts.eps_min : std::exp(log_lo + (log_hi - log_lo) * static_cast<double>(j) / static_cast<double>(ne - 1));
  }

  std::vector<LinkEval> links(shares.size());
  parallel_for(shares.size(), opts.jobs, [&](std::size_t i) {
    links[i] = evaluate_links(problem, shares[i] * problem.W_0, (1.0 - shares[i]) * problem.W_0);
  });

  CodesignSolution sol;
  sol.stats.grid_points = nb * ne * ne;

  // Comms-feasible grid points, in deterministic (share, eps_u, eps_d) order.
  struct GridPoint
  {
    std::size_t share;
    double eps_u;
    double eps_d;
    double comms;
  };
  std::vector<GridPoint> points;
  std::vector<GridPoint> feasible_points;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    for (double eu : eps_levels) {
      for (double ed : eps_levels) {
        const double c = comms_worst(comms_report(problem, links[i], eu, ed));
        points.push_back({i, eu, ed, c});
        if (c <= opts.feas_tol) { feasible_points.push_back(points.back()); }
      }
    }
  }
  sol.stats.comms_feasible_points = static_cast<int>(feasible_points.size());

  std::map<double, InnerResult> inner;
  std::vector<double> pending;
  for (const auto & gp : feasible_points) {
    const double ec = ResourceAllocation{0.0, 0.0, gp.eps_u, gp.eps_d}.eps_c();
    if (inner.emplace(ec, InnerResult{}).second) { pending.push_back(ec); }
  }
  std::vector<InnerResult> solved(pending.size());
  parallel_for(pending.size(), opts.jobs, [&](std::size_t i) { solved[i] = optimize_gains(problem, pending[i], opts); });
  for (std::size_t i = 0; i < pending.size(); ++i) { inner[pending[i]] = std::move(solved[i]); }

  const auto inner_at = [&](double ec) -> const InnerResult & {
    auto it = inner.find(ec);
    if (it == inner.end()) { it = inner.emplace(ec, optimize_gains(problem, ec, opts)).first; }
    return it->second;
  };
  const auto stable = [&](const InnerResult & r) { return !opts.enforce_stability || r.stability_residual <= opts.feas_tol; };

  std::optional<Candidate> best;
  for (const auto & gp : feasible_points) {
    Candidate c;
    c.share = shares[gp.share];
    c.res = ResourceAllocation{links[gp.share].W_u, links[gp.share].W_d, gp.eps_u, gp.eps_d};
    c.eps_c = c.res.eps_c();
    const auto & r = inner_at(c.eps_c);
    if (!stable(r)) { continue; }
    c.J = r.cost;
    if (!best || grid_better(c, *best, opts.tie_tol)) { best = c; }
  }

  if (best) {
    // Coordinate descent on (share, ln eps_u, ln eps_d).
    double steps[3] = {1.0 / static_cast<double>(nb + 1),
                       ne > 1 ? (log_hi - log_lo) / static_cast<double>(ne - 1) : 1.0,
                       ne > 1 ? (log_hi - log_lo) / static_cast<double>(ne - 1) : 1.0};
    for (int sweep = 0; sweep < opts.refine_iters; ++sweep) {
      bool moved = false;
      for (int coord = 0; coord < 3; ++coord) {
        for (double dir : {1.0, -1.0}) {
          double share = best->share;
          double eu = best->res.eps_u;
          double ed = best->res.eps_d;
          if (coord == 0) { share += dir * steps[0]; }
          if (coord == 1) { eu = std::exp(std::log(eu) + dir * steps[1]); }
          if (coord == 2) { ed = std::exp(std::log(ed) + dir * steps[2]); }
          if (!(share > 0.0 && share < 1.0)) { continue; }
          if (eu < opts.eps_min || eu > opts.eps_max || ed < opts.eps_min || ed > opts.eps_max) { continue; }
          const LinkEval ev = evaluate_links(problem, share * problem.W_0, (1.0 - share) * problem.W_0);
          if (comms_worst(comms_report(problem, ev, eu, ed)) > opts.feas_tol) { continue; }
          Candidate c;
          c.share = share;
          c.res = ResourceAllocation{ev.W_u, ev.W_d, eu, ed};
          c.eps_c = c.res.eps_c();
          const auto & r = inner_at(c.eps_c);
          if (!stable(r)) { continue; }
          c.J = r.cost;
          if (refine_better(c, *best, opts.tie_tol)) {
            best = c;
            moved = true;
            ++sol.stats.refine_moves;
          }
        }
      }
      if (!moved) {
        for (double & s : steps) { s *= 0.5; }
        if (steps[0] < 1e-6 && steps[1] < 1e-6 && steps[2] < 1e-6) { break; }
      }
    }
  }

  // Without a feasible point, report the least-violating grid point.
  Candidate chosen;
  if (best) {
    chosen = *best;
  } else {
    const GridPoint * least = nullptr;
    double least_worst = kInf;
    for (const auto & gp : points) {
      double w = gp.comms;
      if (w <= opts.feas_tol) { w = std::max(w, inner_at(ResourceAllocation{0.0, 0.0, gp.eps_u, gp.eps_d}.eps_c()).stability_residual); }
      if (!least || w < least_worst) {
        least = &gp;
        least_worst = w;
      }
    }
    chosen.share = shares[least->share];
    chosen.res = ResourceAllocation{links[least->share].W_u, links[least->share].W_d, least->eps_u, least->eps_d};
    chosen.eps_c = chosen.res.eps_c();
  }

  const InnerResult & r = inner_at(chosen.eps_c);
  sol.gains = r.gains;
  sol.resources = chosen.res;
  sol.cost_J = r.cost;
  const ConstraintReport rep = evaluate_constraints(problem, sol.resources, sol.gains);
  sol.uplink = rep.uplink;
  sol.downlink = rep.downlink;
  sol.derived = rep.loop;
  sol.lambda_u = rep.lambda_u;
  sol.lambda_d = rep.lambda_d;
  sol.residuals = rep.residuals;
  sol.link_infeasible = rep.link_infeasible;
  const double worst = opts.enforce_stability ? rep.worst() : comms_worst(rep);
  if (!best || worst > opts.feas_tol) {
    sol.status = SolveStatus::infeasible;
  } else {
    sol.status = r.converged ? SolveStatus::converged : SolveStatus::iteration_limit;
  }
  sol.stats.inner_solves = static_cast<int>(inner.size());
  sol.stats.final_inner_iterations = r.iterations;
  if (opts.gradient_check) { sol.stats.gradient_check_error = gradient_check(problem, sol.gains, chosen.eps_c, PenaltySpec{}); }
  return sol;
}

}  // namespace csc
