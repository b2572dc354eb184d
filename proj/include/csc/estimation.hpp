#pragma once

/**
 * @file
 * @brief Multi-sensor fusion of noisy state observations.
 *
 * Each of the k_s sensors reports Y_i = X + N_i with i.i.d. zero-mean Gaussian
 * noise of standard deviation sigma on every state component. The fused
 * estimate is the sample mean, whose per-component mean-square error is
 * sigma^2 / k_s.
 */

#include <Eigen/Core>

#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace csc {

/// AGV state [position (m), velocity (m/s), acceleration (m/s^2)].
template<typename Scalar>
using StateVector = Eigen::Matrix<Scalar, 3, 1>;

using State = StateVector<double>;

template<typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived> & m)
{
  return m.allFinite();
}

/// Sensing configuration, validated on construction.
class SensingConfig
{
public:
  SensingConfig(int k_s, double sigma, double T_s, double beta) : k_s_(k_s), sigma_(sigma), T_s_(T_s), beta_(beta)
  {
    if (k_s_ < 1) { throw std::invalid_argument("k_s must be >= 1, got " + std::to_string(k_s_)); }
    if (!(sigma_ >= 0.0) || !std::isfinite(sigma_)) { throw std::invalid_argument("sigma must be finite and >= 0"); }
    if (!(T_s_ > 0.0)) { throw std::invalid_argument("T_s must be > 0"); }
    if (!(beta_ > 0.0)) { throw std::invalid_argument("beta must be > 0"); }
  }

  int k_s() const noexcept { return k_s_; }
  double sigma() const noexcept { return sigma_; }
  double T_s() const noexcept { return T_s_; }
  double beta() const noexcept { return beta_; }

private:
  int k_s_;
  double sigma_;
  double T_s_;
  double beta_;
};

template<typename Scalar>
struct ObservationSet
{
  std::vector<StateVector<Scalar>> observations;
  /// Simulation-only ground truth; never read by fuse().
  std::optional<StateVector<Scalar>> truth;
};

/// Draw k_s observations of `truth` using `engine` (consumes 3 * k_s normals).
template<typename Scalar, typename Rng>
ObservationSet<Scalar> sample_observations(const StateVector<Scalar> & truth, const SensingConfig & cfg, Rng & engine)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  ObservationSet<Scalar> out;
  out.truth = truth;
  out.observations.reserve(static_cast<std::size_t>(cfg.k_s()));
  for (int i = 0; i < cfg.k_s(); ++i) {
    StateVector<Scalar> y = truth;
    for (Eigen::Index c = 0; c < 3; ++c) { y(c) += static_cast<Scalar>(cfg.sigma() * normal(engine)); }
    out.observations.push_back(y);
  }
  return out;
}

/// Seeded form: identical seeds give bit-identical observation sets.
template<typename Scalar>
ObservationSet<Scalar> sample_observations(const StateVector<Scalar> & truth, const SensingConfig & cfg, std::uint64_t seed)
{
  Engine engine{seed};
  return sample_observations(truth, cfg, engine);
}

/// Component-wise mean of the observations.
template<typename Scalar>
StateVector<Scalar> fuse(const ObservationSet<Scalar> & obs)
{
  if (obs.observations.empty()) { throw std::invalid_argument("fuse: empty observation set"); }
  // Running mean: identical observations reproduce themselves exactly.
  StateVector<Scalar> mean = obs.observations.front();
  for (std::size_t i = 1; i < obs.observations.size(); ++i) {
    mean += (obs.observations[i] - mean) / static_cast<Scalar>(i + 1);
  }
  return mean;
}

/// Per-component mean-square error of the fused estimate, sigma^2 / k_s.
inline double estimation_mse(const SensingConfig & cfg) noexcept
{
  return cfg.sigma() * cfg.sigma() / static_cast<double>(cfg.k_s());
}

}  // namespace csc
