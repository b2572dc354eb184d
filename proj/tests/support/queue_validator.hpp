#pragma once

/**
 * @file
 * @brief Slotted fluid queue driven by constant arrivals and random service.
 *
 * Lindley recursion Q+ = max(0, Q + a - S). When a equals the effective
 * capacity of S at exponent theta, P(Q > q) <= exp(-theta q) for every q, so
 * the tail at q = -ln(eps) / theta is at most eps.
 */

#include <cstdint>
#include <vector>

namespace csc::testing {

struct TailEstimate
{
  double fraction{0.0};  ///< slots with Q above the threshold
  double se{0.0};        ///< binomial standard error of `fraction`
  long slots{0};
};

/// Service per slot drawn uniformly from `service`; the queue starts empty.
TailEstimate queue_tail(const std::vector<double> & service, double arrival, double threshold, long slots,
                        std::uint64_t seed);

/// -(1/theta) ln mean(exp(-theta S)) over the equiprobable service values.
double empirical_effective_capacity(const std::vector<double> & service, double theta);

}  // namespace csc::testing
