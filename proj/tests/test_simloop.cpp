#include <doctest.h>

#include <cmath>

#include "csc/simloop.hpp"

using namespace csc;

namespace {

CodesignSolution scripted_solution(const CodesignProblem & p, double eps_c, double D_c_max)
{
  CodesignSolution s;
  s.gains = riccati_gains(p, std::min(eps_c, 0.999));
  s.derived = LoopQoS{D_c_max, eps_c};
  s.status = SolveStatus::converged;
  return s;
}

CodesignProblem noiseless(CodesignProblem p)
{
  p.sensing = SensingConfig(p.sensing.k_s(), 0.0, p.sensing.T_s(), p.sensing.beta());
  return p;
}

}  // namespace

TEST_SUITE("simloop")
{
  TEST_CASE("noiseless lossless undelayed loop replays the expected rollout")
  {
    const auto p = noiseless(baseline_problem(10));
    const auto sol = scripted_solution(p, 0.0, 0.01);
    SimConfig sim;
    sim.n_runs = 1;
    sim.sim_horizon = p.horizon;
    const auto rec = run_closed_loop(p, sol, sim, 0);
    const auto x = rollout_expected(p, sol.gains, 0.0);
    REQUIRE(rec.steps.size() == x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      CHECK(rec.steps[t].x_true == x[t]);
      CHECK(rec.steps[t].delay_steps == 0);
      CHECK(rec.steps[t].eta == 1);
    }
  }

  TEST_CASE("total loss gives the open-loop evolution")
  {
    const auto p = baseline_problem(10);
    const auto sol = scripted_solution(p, 1.0, 0.01);
    SimConfig sim;
    sim.sim_horizon = 40;
    const auto rec = run_closed_loop(p, sol, sim, 3);
    State z = p.X_ini;
    for (const auto & r : rec.steps) {
      CHECK((r.x_true - z).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, z.norm()));
      z = p.plant.A_tilde * z;
    }
  }

  TEST_CASE("baseline solution drives the AGV within 2 m by t = 10 s")
  {
    const auto p = baseline_problem(10);
    const auto sol = solve(p);
    REQUIRE(sol.status == SolveStatus::converged);
    SimConfig sim;
    const auto mc = monte_carlo(p, sol, sim);
    CHECK(mc.summary.abs_delta_check_m.mean <= 2.0);
    CHECK(mc.summary.settled_fraction == 1.0);
  }

  TEST_CASE("single-run aggregate equals the run's statistics")
  {
    const auto p = baseline_problem(10);
    const auto sol = scripted_solution(p, 0.05, 0.04);
    SimConfig sim;
    sim.n_runs = 1;
    const auto mc = monte_carlo(p, sol, sim);
    const auto & st = mc.stats.front();
    CHECK(mc.summary.settling_time_s.mean == st.settling_time_s);
    CHECK(mc.summary.settling_time_s.lo == st.settling_time_s);
    CHECK(mc.summary.overshoot_m.mean == st.overshoot_m);
    CHECK(mc.summary.jitter_rms_m.mean == st.jitter_rms_m);
    CHECK(mc.summary.deliveries == st.deliveries);
  }

  TEST_CASE("doubling n_runs reproduces the first half exactly")
  {
    const auto p = baseline_problem(10);
    const auto sol = scripted_solution(p, 0.05, 0.04);
    SimConfig sim;
    sim.n_runs = 5;
    const auto a = monte_carlo(p, sol, sim);
    sim.n_runs = 10;
    sim.jobs = 3;
    const auto b = monte_carlo(p, sol, sim);
    for (std::size_t i = 0; i < 5; ++i) {
      REQUIRE(a.runs[i].steps.size() == b.runs[i].steps.size());
      for (std::size_t t = 0; t < a.runs[i].steps.size(); ++t) {
        CHECK(a.runs[i].steps[t].x_true == b.runs[i].steps[t].x_true);
        CHECK(a.runs[i].steps[t].eta == b.runs[i].steps[t].eta);
      }
    }
  }

  TEST_CASE("empirical loss rate is calibrated to eps_c")
  {
    const auto p = baseline_problem(10);
    for (double eps : {0.01, 0.1, 0.3}) {
      const auto sol = scripted_solution(p, eps, 0.04);
      SimConfig sim;
      sim.seed = 11;
      const auto mc = monte_carlo(p, sol, sim);
      CHECK(std::abs(mc.summary.loss_rate - eps) <= 3.0 * mc.summary.loss_se);
    }
  }

  TEST_CASE("delay draws")
  {
    Engine rng(1);
    CHECK(draw_delay_steps(0.1, 0.0, 0.05, rng) == 0);
    CHECK(draw_delay_steps(0.1, 1.0, 0.05, rng) == 2);
    CHECK(draw_delay_steps(std::numeric_limits<double>::infinity(), 0.1, 0.05, rng) > 1000000);
    for (int i = 0; i < 1000; ++i) {
      const int d = draw_delay_steps(0.12, 0.01, 0.05, rng);
      CHECK(d >= 0);
      CHECK(d <= 3);
    }
  }

  TEST_CASE("run statistics on a hand-made trajectory")
  {
    TrajectoryRecord rec;
    rec.T_d = 0.5;
    for (double d : {10.0, 5.0, 1.0, -3.0, 1.0, 0.5, -0.5, 0.0}) {
      StepRecord r;
      r.x_true = State(d, 0, 0);
      r.eta = 1;
      rec.steps.push_back(r);
    }
    rec.steps[2].eta = 0;
    rec.steps[3].eta.reset();
    SimConfig sim;
    sim.check_time_s = 1.0;
    const auto st = run_statistics(rec, sim);
    CHECK(st.settled);
    CHECK(st.settling_time_s == 2.0);
    CHECK(st.overshoot_m == 3.0);
    CHECK(st.jitter_rms_m == doctest::Approx(std::sqrt((1.0 + 0.25 + 0.25 + 0.0) / 4.0)).epsilon(1e-15));
    CHECK(st.abs_delta_check_m == 1.0);
    CHECK(st.holds == 1);
    CHECK(st.losses == 1);
    CHECK(st.deliveries == 7);
  }

  TEST_CASE("unsettled runs are censored at the horizon")
  {
    TrajectoryRecord rec;
    rec.T_d = 0.1;
    for (int i = 0; i < 8; ++i) {
      StepRecord r;
      r.x_true = State(10.0, 0, 0);
      rec.steps.push_back(r);
    }
    const auto st = run_statistics(rec, SimConfig{});
    CHECK_FALSE(st.settled);
    CHECK(st.settling_time_s == doctest::Approx(0.8));
    CHECK(st.jitter_rms_m == 10.0);
  }

  TEST_CASE("unconverged solutions need an explicit opt-in")
  {
    const auto p = baseline_problem(10);
    auto sol = scripted_solution(p, 0.01, 0.04);
    sol.status = SolveStatus::infeasible;
    SimConfig sim;
    CHECK_THROWS_AS(run_closed_loop(p, sol, sim, 0), std::invalid_argument);
    sim.allow_unconverged = true;
    CHECK_NOTHROW(run_closed_loop(p, sol, sim, 0));
  }

  TEST_CASE("sweep parameters")
  {
    const auto p = baseline_problem(10);
    CHECK(apply_parameter(p, "k_s", 6).sensing.k_s() == 6);
    CHECK(apply_parameter(p, "k_s", 6).traffic.k_s == 6);
    CHECK(apply_parameter(p, "W_0", 1e6).W_0 == 1e6);
    CHECK(apply_parameter(p, "D_0", 0.05).D_0 == 0.05);
    CHECK_THROWS_AS(apply_parameter(p, "k_s", 2.5), std::invalid_argument);
    try {
      apply_parameter(p, "sigma", 1.0);
      FAIL("expected throw");
    } catch (const std::invalid_argument & e) {
      CHECK(std::string(e.what()).find("k_s, W_0, D_0") != std::string::npos);
    }
  }

  TEST_CASE("k_s sweep yields one row per value")
  {
    SimConfig sim;
    sim.n_runs = 4;
    const auto res = sweep(baseline_problem(10), "k_s", {2, 6, 10, 14, 17}, sim, SolverOptions{});
    REQUIRE(res.rows.size() == 5);
    CHECK(res.solutions.size() == 5);
    CHECK(res.trajectories.size() == 5);
    CHECK(res.rows[3].value == 14.0);
    CHECK(res.rows[3].param == "k_s");
  }

  TEST_CASE("mean interval")
  {
    const auto iv = mean_interval({1.0, 2.0, 3.0, 4.0});
    CHECK(iv.mean == 2.5);
    const double half = 1.959963984540054 * std::sqrt((2.25 + 0.25 + 0.25 + 2.25) / 3.0 / 4.0);
    CHECK(iv.hi - iv.mean == doctest::Approx(half).epsilon(1e-12));
    CHECK(iv.mean - iv.lo == doctest::Approx(half).epsilon(1e-12));
  }
}
