#pragma once

#include <cmath>
#include <concepts>
#include <numbers>
#include <stdexcept>
#include <string>

namespace csc {

/// Thrown when the finite-blocklength penalty eats the whole Shannon rate.
class LinkInfeasible : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class RateMode {
  /// Per-channel-use normal approximation scaled by the bandwidth (default).
  normalized,
  /// Dispersion penalty subtracted from the bit/s rate without rescaling.
  literal,
};

enum class SnrUnit { linear, dB };

inline double to_linear_snr(double value, SnrUnit unit)
{
  return unit == SnrUnit::linear ? value : std::pow(10.0, value / 10.0);
}

/// Physical and QoS parameters of one link direction.
struct LinkConfig
{
  double W{1e6};        ///< bandwidth (Hz)
  double snr{20.0};     ///< linear signal-to-noise ratio
  int L{200};           ///< blocklength (channel uses)
  double e{1e-3};       ///< decoding error probability
  double theta{1e-3};   ///< QoS exponent (1/bit)

  void validate() const
  {
    if (!(W > 0.0) || !std::isfinite(W)) { throw std::invalid_argument("link: W must be finite and > 0"); }
    if (!(snr > 0.0) || !std::isfinite(snr)) { throw std::invalid_argument("link: snr must be finite and > 0"); }
    if (L < 1) { throw std::invalid_argument("link: L must be >= 1"); }
    if (!(e > 0.0 && e < 0.5)) { throw std::invalid_argument("link: e must lie in (0, 0.5)"); }
    if (!(theta > 0.0) || !std::isfinite(theta)) { throw std::invalid_argument("link: theta must be finite and > 0"); }
  }
};

/// Complementary standard normal CDF.
template<std::floating_point T>
T q_function(T x)
{
  return T(0.5) * std::erfc(x / std::numbers::sqrt2_v<T>);
}

/**
 * @brief Inverse of the complementary standard normal CDF.
 *
 * Rational approximation (Acklam, relative error ~1e-9) followed by two
 * Newton steps on Q(x) - p, which takes the result to full double precision.
 *
 * @throws std::domain_error unless 0 < p < 1.
 */
template<std::floating_point T>
T q_inverse(T p)
{
  if (!(p > T(0) && p < T(1))) { throw std::domain_error("q_inverse: p must lie in (0, 1)"); }
  if (p > T(0.5)) { return -q_inverse(T(1) - p); }  // 1 - p is exact here
  if (p == T(0.5)) { return T(0); }

  constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                          1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                          6.680131188771972e+01,  -1.328068155288572e+01};
  constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                          -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                          3.754408661907416e+00};

  // lower-tail quantile z = Phi^{-1}(p) <= 0, then Q^{-1}(p) = -z
  const double pd = static_cast<double>(p);
  double z;
  if (pd < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(pd));
    z = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
      / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = pd - 0.5;
    const double r = q * q;
    z = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
      / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  T x = static_cast<T>(-z);
  const T inv_sqrt_2pi = T(1) / std::sqrt(T(2) * std::numbers::pi_v<T>);
  for (int it = 0; it < 2; ++it) {
    const T pdf = inv_sqrt_2pi * std::exp(-x * x / T(2));
    x += (q_function(x) - p) / pdf;
  }
  return x;
}

/// Channel dispersion approximation V = 1 - 1/(1+snr)^2.
template<std::floating_point T>
T channel_dispersion(T snr)
{
  const T s = T(1) + snr;
  return T(1) - T(1) / (s * s);
}

/**
 * Finite-blocklength service rate of a link (bit/s).
 *
 * normalized:    W * [log2(1+snr) - sqrt(V/L) * Q^{-1}(e) * log2(e)]
 * literal:    W * log2(1+snr) - sqrt(V/L) * Q^{-1}(e)
 *
 * @throws LinkInfeasible if the rate is not positive.
 */
inline double finite_blocklength_rate(const LinkConfig & link, RateMode mode = RateMode::normalized)
{
  link.validate();
  const double shannon = std::log2(1.0 + link.snr);
  const double penalty = std::sqrt(channel_dispersion(link.snr) / static_cast<double>(link.L)) * q_inverse(link.e);
  const double rate = mode == RateMode::normalized ? link.W * (shannon - penalty * std::numbers::log2e)
                                                   : link.W * shannon - penalty;
  if (!(rate > 0.0)) {
    throw LinkInfeasible("link infeasible at this blocklength (rate " + std::to_string(rate) + " bit/s)");
  }
  return rate;
}

}  // namespace csc
