#pragma once

/**
 * @file
 * @brief Link-layer QoS of the uplink/downlink tandem queue.
 *
 * Effective capacities, delay-bound/violation-probability pairs, closed-loop
 * cycle time and loss, and the tandem arrival/departure rates that couple the
 * downlink load to the uplink service.
 */

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <variant>

#include "phy.hpp"
#include "rng.hpp"

namespace csc {

struct TrafficModel
{
  double beta{1000.0};  ///< bits per sensing package
  double gamma{20.0};   ///< bits per control package
  int k_s{10};          ///< sensors per loop
  double T_s{0.05};     ///< sensing period (s)
  int N_cmd{10};        ///< control commands generated per loop

  void validate() const;
};

/// Effective capacity, violation probability, delay bound and exponent of one queue.
struct QueueQoS
{
  double C{0.0};
  double eps{0.0};
  double D_max{0.0};
  double theta{0.0};
};

struct LoopQoS
{
  double D_c_max{0.0};  ///< cycle time bound (s)
  double eps_c{0.0};    ///< closed-loop package loss probability
};

/// The link's SNR is a fixed number.
struct DeterministicSnr
{};

/// The link's SNR is a random variable; expectations are sample means over
/// `samples` draws from an engine seeded with `seed`.
struct SampledSnr
{
  std::function<double(Engine &)> draw;
  std::uint64_t seed{0};
  std::size_t samples{10000};
  std::string label{"sampled"};
};

using SnrModel = std::variant<DeterministicSnr, SampledSnr>;

/// Rayleigh block fading: exponentially distributed SNR with the given mean.
SampledSnr rayleigh_snr(double mean_snr, std::uint64_t seed, std::size_t samples);

/// Equiprobable two-point SNR distribution.
SampledSnr two_point_snr(double snr_a, double snr_b, std::uint64_t seed, std::size_t samples);

double uplink_arrival_rate(const TrafficModel & t);

/// Mean finite-blocklength rate over the SNR model.
double expected_rate(const LinkConfig & link, const SnrModel & model, RateMode mode = RateMode::normalized);

/**
 * Effective capacity -(1/theta) ln E[exp(-theta R)] at a signed exponent.
 *
 * Under DeterministicSnr this is the rate R itself for every theta != 0. Under
 * SampledSnr a draw whose rate is not positive counts as an outage (R = 0).
 * The expectation is evaluated in log space, so theta * R in the thousands is
 * fine.
 *
 * @throws LinkInfeasible for a deterministic link with R <= 0.
 */
double effective_capacity(const LinkConfig & link, const SnrModel & model, double theta,
                          RateMode mode = RateMode::normalized);

/// Effective capacity at the link's own exponent.
inline double effective_capacity(const LinkConfig & link, const SnrModel & model, RateMode mode = RateMode::normalized)
{
  return effective_capacity(link, model, link.theta, mode);
}

/// D_max = -ln(eps) / (theta * C).
double max_delay(double eps, double theta, double C);

/// QueueQoS consistent with the delay bound relation.
QueueQoS make_queue_qos(double C, double eps, double theta);

LoopQoS loop_metrics(const QueueQoS & up, const QueueQoS & down);

/// Departure rate of the uplink queue (piecewise in theta_d vs theta_u).
double uplink_departure_rate(double theta_u, double theta_d, const LinkConfig & link_u, const SnrModel & snr_u,
                             double lambda_u, RateMode mode = RateMode::normalized);

/// Downlink arrival rate N*gamma/(beta*k_s) times the uplink departure rate.
double downlink_arrival_rate(const TrafficModel & t, double theta_u, double theta_d, const LinkConfig & link_u,
                             const SnrModel & snr_u, double lambda_u, RateMode mode = RateMode::normalized);

struct CapacityResiduals
{
  double uplink{0.0};    ///< C_u - lambda_u
  double downlink{0.0};  ///< C_d - lambda_d

  bool feasible() const noexcept { return uplink >= 0.0 && downlink >= 0.0; }
};

CapacityResiduals check_capacity_constraints(double C_u, double C_d, double lambda_u, double lambda_d);

}  // namespace csc
