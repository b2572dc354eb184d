#pragma once

/**
 * @file
 * @brief Property checks run against a configured problem.
 */

#include <cstdint>
#include <string>
#include <vector>

#include "codesign.hpp"

namespace csc {

struct CheckResult
{
  std::string name;
  bool passed{false};
  std::string detail;
};

/// E[X+' M X+] - X' M X for X+ = A~X + eta B~K(X + n), eta ~ Bernoulli(1 - eps_c),
/// n ~ N(0, noise_var I), written out term by term without the F1/F2 grouping.
double expected_lyapunov_change(const PlantModel<double> & p, const Matrix3<double> & M, const State & x, const Gain & k,
                                double noise_var, double eps_c);

std::vector<CheckResult> run_validation(const CodesignProblem & problem, std::uint64_t seed);

/// Machine-readable form: {"passed": bool, "checks": [{name, passed, detail}, ...]}.
std::string validation_json(const std::vector<CheckResult> & results);

}  // namespace csc
