#pragma once

/**
 * @file
 * @brief AGV longitudinal dynamics and the stochastic Lyapunov decrease test.
 *
 * Continuous model  dX/dt = A X + B U  with
 *
 *   A = [[0, 1, 0], [0, 0, 1], [0, 0, -1/varsigma]],   B = [0, 0, -1/varsigma]^T,
 *
 * Euler-discretized with step T_d into  X+ = A_tilde X + B_tilde U.
 */

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "estimation.hpp"

namespace csc {

template<typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Row of state-feedback gains, U = K X.
template<typename Scalar>
using GainRow = Eigen::Matrix<Scalar, 1, 3>;

using Gain = GainRow<double>;

template<typename Scalar>
struct PlantModel
{
  Scalar varsigma;
  Scalar T_d;
  Matrix3<Scalar> A;
  StateVector<Scalar> B;
  Matrix3<Scalar> A_tilde;
  StateVector<Scalar> B_tilde;
};

template<typename Scalar>
PlantModel<Scalar> build_plant(Scalar varsigma, Scalar T_d)
{
  if (varsigma == Scalar(0)) { throw std::invalid_argument("build_plant: singular engine constant (varsigma = 0)"); }
  if (!(T_d > Scalar(0))) { throw std::invalid_argument("build_plant: T_d must be > 0"); }
  PlantModel<Scalar> p;
  p.varsigma = varsigma;
  p.T_d = T_d;
  p.A.setZero();
  p.A(0, 1) = Scalar(1);
  p.A(1, 2) = Scalar(1);
  p.A(2, 2) = Scalar(-1) / varsigma;
  p.B << Scalar(0), Scalar(0), Scalar(-1) / varsigma;
  p.A_tilde = T_d * p.A + Matrix3<Scalar>::Identity();
  p.B_tilde = T_d * p.B;
  return p;
}

/// Time-varying gain schedule K_1..K_N.
struct GainSchedule
{
  std::vector<Gain> gains;

  int horizon() const noexcept { return static_cast<int>(gains.size()); }

  static GainSchedule zeros(int horizon) { return GainSchedule{std::vector<Gain>(static_cast<std::size_t>(horizon), Gain::Zero())}; }

  bool finite() const
  {
    for (const auto & k : gains) {
      if (!k.allFinite()) { return false; }
    }
    return true;
  }
};

/// Symmetric and no eigenvalue below -tol * max(1, |M|).
template<typename Derived>
bool is_positive_semidefinite(const Eigen::MatrixBase<Derived> & m, double tol = 1e-10)
{
  using Scalar = typename Derived::Scalar;
  if (!m.allFinite()) { return false; }
  const double scale = std::max(1.0, static_cast<double>(m.cwiseAbs().maxCoeff()));
  if (static_cast<double>((m - m.transpose()).cwiseAbs().maxCoeff()) > tol * scale) { return false; }
  Eigen::Matrix<Scalar, Derived::RowsAtCompileTime, Derived::ColsAtCompileTime> sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<decltype(sym)> es(sym, Eigen::EigenvaluesOnly);
  return static_cast<double>(es.eigenvalues().minCoeff()) >= -tol * scale;
}

/// Cost and Lyapunov weights.
struct StabilityWeights
{
  Matrix3<double> P{Matrix3<double>::Identity()};          ///< stage state weight
  double R_w{0.01};                                        ///< scalar control weight
  Matrix3<double> S{Matrix3<double>::Identity()};          ///< terminal weight
  Matrix3<double> lyapunov{Matrix3<double>::Identity()};   ///< matrix of the stability test

  void validate() const
  {
    if (!is_positive_semidefinite(P)) { throw std::invalid_argument("weights: P is not symmetric positive semidefinite"); }
    if (!is_positive_semidefinite(S)) { throw std::invalid_argument("weights: S is not symmetric positive semidefinite"); }
    if (!is_positive_semidefinite(lyapunov)) {
      throw std::invalid_argument("weights: lyapunov matrix is not symmetric positive semidefinite");
    }
    if (!(R_w >= 0.0) || !std::isfinite(R_w)) { throw std::invalid_argument("weights: R_w must be finite and >= 0"); }
  }
};

/// Expected next state when each command is lost with probability eps_c.
template<typename Scalar>
StateVector<Scalar> step_expected(const PlantModel<Scalar> & p, const StateVector<Scalar> & x, const GainRow<Scalar> & k,
                                  Scalar eps_c)
{
  return p.A_tilde * x + (Scalar(1) - eps_c) * p.B_tilde * (k * x)(0);
}

/// One realized step: the command is computed from the estimate, the dynamics run on the truth.
template<typename Scalar>
StateVector<Scalar> step_stochastic(const PlantModel<Scalar> & p, const StateVector<Scalar> & x_true,
                                    const StateVector<Scalar> & x_hat, const GainRow<Scalar> & k, int eta)
{
  if (eta != 0 && eta != 1) { throw std::invalid_argument("step_stochastic: eta must be 0 or 1"); }
  if (eta == 0) { return p.A_tilde * x_true; }
  return p.A_tilde * x_true + p.B_tilde * (k * x_hat)(0);
}

template<typename Scalar>
struct LyapunovTerms
{
  Scalar F1;
  Scalar F2;
};

namespace detail {

// noise_var = sigma^2 / k_s
template<typename Scalar>
LyapunovTerms<Scalar> lyapunov_terms(const PlantModel<Scalar> & p, const Matrix3<Scalar> & P, const StateVector<Scalar> & x,
                                     const GainRow<Scalar> & k, Scalar noise_var)
{
  const StateVector<Scalar> ax = p.A_tilde * x;
  const Matrix3<Scalar> bk = p.B_tilde * k;
  const StateVector<Scalar> m = ax + bk * x;
  const Scalar v_ax = ax.dot(P * ax);
  const Scalar f1 = m.dot(P * m) + (bk.transpose() * P * bk).trace() * noise_var - v_ax;
  const Scalar f2 = x.dot(P * x) - v_ax;
  return {f1, f2};
}

}  // namespace detail

/**
 * Terms of the stability-communication-sensing inequality (1 - eps_c) F1 <= F2:
 *
 *   F1 = |A~X + B~KX|_P^2 + Tr[(B~K)^T P (B~K)] sigma^2/k_s - |A~X|_P^2
 *   F2 = |X|_P^2 - |A~X|_P^2
 *
 * @throws std::invalid_argument if P is not positive semidefinite.
 */
template<typename Scalar>
LyapunovTerms<Scalar> lyapunov_terms(const PlantModel<Scalar> & p, const Matrix3<Scalar> & P, const StateVector<Scalar> & x,
                                     const GainRow<Scalar> & k, Scalar sigma, int k_s)
{
  if (!is_positive_semidefinite(P)) { throw std::invalid_argument("lyapunov_terms: P is not positive semidefinite"); }
  if (k_s < 1) { throw std::invalid_argument("lyapunov_terms: k_s must be >= 1"); }
  return detail::lyapunov_terms(p, P, x, k, sigma * sigma / static_cast<Scalar>(k_s));
}

template<typename Scalar>
struct StabilityCheck
{
  bool holds;
  Scalar residual;  ///< (1 - eps_c) F1 - F2; <= 0 when the inequality holds
};

template<typename Scalar>
StabilityCheck<Scalar> stability_holds(Scalar F1, Scalar F2, Scalar eps_c)
{
  const Scalar residual = (Scalar(1) - eps_c) * F1 - F2;
  const Scalar tol = Scalar(1e-9) * (Scalar(1) + std::abs(F2));
  return {residual <= tol, residual};
}

/**
 * Stabilizing solution of the discrete algebraic Riccati equation
 *   X = Q + A^T X A - A^T X B (R + B^T X B)^{-1} B^T X A
 * by fixed-point iteration of the Riccati difference equation.
 */
template<typename Scalar>
Matrix3<Scalar> solve_dare(const Matrix3<Scalar> & A, const StateVector<Scalar> & B, const Matrix3<Scalar> & Q, Scalar R,
                           int max_iters = 200000, Scalar tol = Scalar(1e-13))
{
  Matrix3<Scalar> X = Q;
  for (int it = 0; it < max_iters; ++it) {
    const Scalar denom = R + B.dot(X * B);
    if (!(denom > Scalar(0))) { throw std::runtime_error("solve_dare: R + B^T X B is not positive"); }
    const GainRow<Scalar> K = (B.transpose() * X * A) / denom;
    Matrix3<Scalar> next = Q + A.transpose() * X * (A - B * K);
    next = (next + next.transpose()) / Scalar(2);
    const Scalar change = (next - X).cwiseAbs().maxCoeff();
    X = next;
    if (change <= tol * std::max(Scalar(1), X.cwiseAbs().maxCoeff())) { return X; }
  }
  throw std::runtime_error("solve_dare: no convergence (is (A, B) stabilizable?)");
}

}  // namespace csc
