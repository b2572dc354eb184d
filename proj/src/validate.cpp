#include "csc/validate.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include <json.hpp>

#include "csc/csv.hpp"

namespace csc {

double expected_lyapunov_change(const PlantModel<double> & p, const Matrix3<double> & M, const State & x, const Gain & k,
                                double noise_var, double eps_c)
{
  const State ax = p.A_tilde * x;
  const State bkx = p.B_tilde * (k * x)(0);
  // Lost command: X+ = A~X. Delivered: X+ = A~X + B~K X + B~K n, and E[n' G n] = noise_var * sum_i G_ii.
  double lost = 0.0;
  double hit = 0.0;
  double noise = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      lost += ax(i) * M(i, j) * ax(j);
      hit += (ax(i) + bkx(i)) * M(i, j) * (ax(j) + bkx(j));
    }
  }
  for (int c = 0; c < 3; ++c) {
    double g = 0.0;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) { g += p.B_tilde(i) * k(c) * M(i, j) * p.B_tilde(j) * k(c); }
    }
    noise += noise_var * g;
  }
  double now = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) { now += x(i) * M(i, j) * x(j); }
  }
  return eps_c * lost + (1.0 - eps_c) * (hit + noise) - now;
}

namespace {

std::string fmt(double v)
{
  return format_number(v);
}

CheckResult check(std::string name, bool ok, std::string detail)
{
  return CheckResult{std::move(name), ok, std::move(detail)};
}

}  // namespace

std::vector<CheckResult> run_validation(const CodesignProblem & problem, std::uint64_t seed)
{
  std::vector<CheckResult> out;
  Engine rng = make_engine(seed, 0, Stream::validation);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const auto & w = problem.weights;

  out.push_back(check("weights_psd",
                      is_positive_semidefinite(w.P) && is_positive_semidefinite(w.S) &&
                        is_positive_semidefinite(w.lyapunov) && w.R_w >= 0.0,
                      "P, S, lyapunov symmetric PSD and R_w >= 0"));

  {
    const auto & p = problem.plant;
    const bool ok = (p.A_tilde - Matrix3<double>::Identity()) == (p.T_d * p.A) && p.B_tilde == p.T_d * p.B;
    out.push_back(check("plant_discretization", ok, "A~ - I == T_d A and B~ == T_d B bitwise"));
  }

  {
    double worst = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double p = 1e-6 * std::pow(0.499 / 1e-6, i / 200.0);
      worst = std::max(worst, std::abs(q_function(q_inverse(p)) - p));
    }
    out.push_back(check("q_inverse_round_trip", worst <= 1e-9, "max |Q(Q^-1(p)) - p| = " + fmt(worst)));
  }

  {
    bool ok = true;
    for (const LinkConfig * base : {&problem.link_u, &problem.link_d}) {
      LinkConfig a = *base;
      a.W = 0.5 * problem.W_0;
      double prev = 0.0;
      for (double f : {0.25, 0.5, 1.0, 2.0}) {
        LinkConfig l = a;
        l.W *= f;
        l.snr *= f;
        l.L = std::max(1, static_cast<int>(std::lround(a.L * f)));
        l.e = std::min(0.499, a.e * f);
        double r = 0.0;
        try {
          r = finite_blocklength_rate(l, problem.rate_mode);
        } catch (const LinkInfeasible &) {
          r = 0.0;
        }
        ok = ok && r >= prev;
        prev = r;
      }
    }
    out.push_back(check("rate_monotone", ok, "rate nondecreasing in W, snr, L, e jointly scaled"));
  }

  {
    double worst = 0.0;
    bool ok = true;
    for (const LinkConfig * base : {&problem.link_u, &problem.link_d}) {
      LinkConfig l = *base;
      l.W = 0.5 * problem.W_0;
      double C = 0.0;
      try {
        C = effective_capacity(l, base == &problem.link_u ? problem.snr_u : problem.snr_d, problem.rate_mode);
      } catch (const LinkInfeasible &) {
        ok = false;
        continue;
      }
      for (int i = 0; i <= 100; ++i) {
        const double eps = 1e-6 * std::pow(0.4 / 1e-6, i / 100.0);
        worst = std::max(worst, std::abs(std::exp(-l.theta * C * max_delay(eps, l.theta, C)) - eps) / eps);
      }
    }
    out.push_back(check("delay_round_trip", ok && worst <= 1e-12, "max relative |exp(-theta C D) - eps| / eps = " + fmt(worst)));
  }

  {
    LinkConfig up = problem.link_u;
    up.W = 0.5 * problem.W_0;
    const double lu = uplink_arrival_rate(problem.traffic);
    const double th = up.theta;
    bool ok = true;
    std::string detail;
    try {
      const double at = downlink_arrival_rate(problem.traffic, th, th, up, problem.snr_u, lu, problem.rate_mode);
      const double above = downlink_arrival_rate(problem.traffic, th, th * (1.0 + 1e-9), up, problem.snr_u, lu, problem.rate_mode);
      const double jump = at > 0.0 ? std::abs(above - at) / at : std::abs(above - at);
      ok = jump <= 1e-6;
      detail = "|lambda_d(theta_u(1+1e-9)) - lambda_d(theta_u)| / lambda_d = " + fmt(jump);
    } catch (const LinkInfeasible & e) {
      ok = false;
      detail = e.what();
    }
    out.push_back(check("tandem_continuity", ok, detail));
  }

  {
    bool ok = true;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double a = u01(rng);
      const double b = u01(rng);
      const double ec = loop_metrics(QueueQoS{1, a, 1, 1}, QueueQoS{1, b, 1, 1}).eps_c;
      ok = ok && ec >= std::max(a, b) - 1e-15 && ec <= a + b + 1e-15;
    }
    out.push_back(check("loop_loss_bounds", ok, "max(eps_u, eps_d) <= eps_c <= eps_u + eps_d"));
  }

  {
    bool ok = true;
    std::string detail;
    for (const auto & [link, model] : {std::pair{problem.link_u, problem.snr_u}, std::pair{problem.link_d, problem.snr_d}}) {
      LinkConfig l = link;
      l.W = 0.5 * problem.W_0;
      const SnrModel fading = rayleigh_snr(l.snr, derive_seed(seed, 1, Stream::validation), 4000);
      for (const SnrModel * m : {&model, &fading}) {
        try {
          const double C = effective_capacity(l, *m, problem.rate_mode);
          const double R = expected_rate(l, *m, problem.rate_mode);
          ok = ok && C <= R * (1.0 + 1e-12);
        } catch (const LinkInfeasible &) {
          ok = false;
        }
      }
    }
    out.push_back(check("effective_capacity_jensen", ok, "C <= E[R] for the configured and a Rayleigh SNR model"));
  }

  {
    double worst = 0.0;
    const double v = problem.noise_variance();
    for (int i = 0; i < 1000; ++i) {
      const State x(100.0 * unit(rng), 10.0 * unit(rng), 5.0 * unit(rng));
      const Gain k(unit(rng), unit(rng), unit(rng));
      const double eps = 0.5 * (unit(rng) + 1.0);
      const auto t = detail::lyapunov_terms(problem.plant, w.lyapunov, x, k, v);
      const double lhs = expected_lyapunov_change(problem.plant, w.lyapunov, x, k, v, eps);
      const double rhs = (1.0 - eps) * t.F1 - t.F2;
      worst = std::max(worst, std::abs(lhs - rhs) / (1.0 + std::abs(lhs) + std::abs(rhs)));
    }
    out.push_back(check("lyapunov_identity", worst <= 1e-9, "max relative gap = " + fmt(worst)));
  }

  {
    double worst_cost = 0.0;
    double worst_pen = 0.0;
    const double eps_c = 1e-3;
    const GainSchedule base = riccati_gains(problem, eps_c);
    const double scale = std::max(rollout_cost(problem, base, eps_c), 1e-12);
    for (int i = 0; i < 10; ++i) {
      GainSchedule g = base;
      for (auto & row : g.gains) {
        for (int j = 0; j < 3; ++j) { row(j) *= 1.0 + 0.3 * unit(rng); }
      }
      worst_cost = std::max(worst_cost, gradient_check(problem, g, eps_c, PenaltySpec{}));
      worst_pen = std::max(worst_pen, gradient_check(problem, g, eps_c, PenaltySpec{1e3, 1e-3, scale}));
    }
    out.push_back(check("cost_gradient", worst_cost <= 1e-4, "max relative error vs central differences = " + fmt(worst_cost)));
    out.push_back(check("penalty_gradient", worst_pen <= 1e-4, "max relative error vs central differences = " + fmt(worst_pen)));
  }

  {
    const double s = problem.sensing.sigma();
    bool ok = true;
    if (s > 0.0) {
      for (int k = 1; k < 64; ++k) {
        ok = ok && estimation_mse(SensingConfig(k + 1, s, 1.0, 1.0)) < estimation_mse(SensingConfig(k, s, 1.0, 1.0));
      }
    }
    out.push_back(check("estimation_mse_decreasing", ok, "sigma^2/k_s strictly decreasing in k_s"));
  }
  return out;
}

std::string validation_json(const std::vector<CheckResult> & results)
{
  nlohmann::ordered_json j;
  bool all = true;
  nlohmann::ordered_json checks = nlohmann::ordered_json::array();
  for (const auto & r : results) {
    all = all && r.passed;
    checks.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
  }
  j["passed"] = all;
  j["checks"] = checks;
  return j.dump(2) + "\n";
}

}  // namespace csc
