#include "csc/qos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace csc {

void TrafficModel::validate() const
{
  if (!(beta > 0.0)) { throw std::invalid_argument("traffic: beta must be > 0"); }
  if (!(gamma >= 0.0)) { throw std::invalid_argument("traffic: gamma must be >= 0"); }
  if (k_s < 1) { throw std::invalid_argument("traffic: k_s must be >= 1"); }
  if (!(T_s > 0.0)) { throw std::invalid_argument("traffic: T_s must be > 0"); }
  if (N_cmd < 1) { throw std::invalid_argument("traffic: N must be >= 1"); }
}

SampledSnr rayleigh_snr(double mean_snr, std::uint64_t seed, std::size_t samples)
{
  if (!(mean_snr > 0.0)) { throw std::invalid_argument("rayleigh_snr: mean must be > 0"); }
  return SampledSnr{
    [mean_snr](Engine & e) { return std::exponential_distribution<double>(1.0 / mean_snr)(e); },
    seed,
    samples,
    "rayleigh",
  };
}

SampledSnr two_point_snr(double snr_a, double snr_b, std::uint64_t seed, std::size_t samples)
{
  return SampledSnr{
    [snr_a, snr_b](Engine & e) { return std::bernoulli_distribution(0.5)(e) ? snr_b : snr_a; },
    seed,
    samples,
    "two_point",
  };
}

double uplink_arrival_rate(const TrafficModel & t)
{
  return t.beta * static_cast<double>(t.k_s) / t.T_s;
}

namespace {

std::vector<double> sampled_rates(const LinkConfig & link, const SampledSnr & model, RateMode mode)
{
  if (model.samples == 0 || !model.draw) { throw std::invalid_argument("sampled SNR model needs a sampler and samples > 0"); }
  Engine engine{model.seed};
  std::vector<double> rates;
  rates.reserve(model.samples);
  LinkConfig draw = link;
  for (std::size_t i = 0; i < model.samples; ++i) {
    draw.snr = model.draw(engine);
    double r = 0.0;
    if (draw.snr > 0.0) {
      try {
        r = finite_blocklength_rate(draw, mode);
      } catch (const LinkInfeasible &) {
        r = 0.0;
      }
    }
    rates.push_back(r);
  }
  return rates;
}

// log(mean(exp(x))) without overflow and without cancellation for tiny spreads
double log_mean_exp(const std::vector<double> & x)
{
  const double m = *std::max_element(x.begin(), x.end());
  double acc = 0.0;
  for (double v : x) { acc += std::expm1(v - m); }
  return m + std::log1p(acc / static_cast<double>(x.size()));
}

}  // namespace

double expected_rate(const LinkConfig & link, const SnrModel & model, RateMode mode)
{
  if (std::holds_alternative<DeterministicSnr>(model)) { return finite_blocklength_rate(link, mode); }
  const auto rates = sampled_rates(link, std::get<SampledSnr>(model), mode);
  double sum = 0.0;
  for (double r : rates) { sum += r; }
  return sum / static_cast<double>(rates.size());
}

double effective_capacity(const LinkConfig & link, const SnrModel & model, double theta, RateMode mode)
{
  if (!std::isfinite(theta) || theta == 0.0) { throw std::domain_error("effective_capacity: theta must be finite and nonzero"); }
  if (std::holds_alternative<DeterministicSnr>(model)) { return finite_blocklength_rate(link, mode); }
  auto x = sampled_rates(link, std::get<SampledSnr>(model), mode);
  for (double & r : x) { r *= -theta; }
  return -log_mean_exp(x) / theta;
}

double max_delay(double eps, double theta, double C)
{
  if (!(eps > 0.0 && eps < 1.0)) { throw std::domain_error("max_delay: eps must lie in (0, 1)"); }
  if (!(theta > 0.0) || !(C > 0.0)) { throw std::domain_error("max_delay: theta and C must be > 0"); }
  return -std::log(eps) / (theta * C);
}

QueueQoS make_queue_qos(double C, double eps, double theta)
{
  return QueueQoS{C, eps, max_delay(eps, theta, C), theta};
}

LoopQoS loop_metrics(const QueueQoS & up, const QueueQoS & down)
{
  return LoopQoS{
    up.D_max + down.D_max,
    1.0 - (1.0 - up.eps) * (1.0 - down.eps),
  };
}

double uplink_departure_rate(double theta_u, double theta_d, const LinkConfig & link_u, const SnrModel & snr_u,
                             double lambda_u, RateMode mode)
{
  if (!(theta_u > 0.0) || !(theta_d > 0.0)) { throw std::domain_error("uplink_departure_rate: exponents must be > 0"); }
  if (theta_d <= theta_u) { return lambda_u; }
  const double c_neg = effective_capacity(link_u, snr_u, theta_u - theta_d, mode);
  return ((theta_d - theta_u) * c_neg + lambda_u * theta_u) / theta_d;
}

double downlink_arrival_rate(const TrafficModel & t, double theta_u, double theta_d, const LinkConfig & link_u,
                             const SnrModel & snr_u, double lambda_u, RateMode mode)
{
  const double ratio = static_cast<double>(t.N_cmd) * t.gamma / (t.beta * static_cast<double>(t.k_s));
  if (ratio == 0.0) { return 0.0; }
  return ratio * uplink_departure_rate(theta_u, theta_d, link_u, snr_u, lambda_u, mode);
}

CapacityResiduals check_capacity_constraints(double C_u, double C_d, double lambda_u, double lambda_d)
{
  return CapacityResiduals{C_u - lambda_u, C_d - lambda_d};
}

}  // namespace csc
