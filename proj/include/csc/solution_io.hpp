#pragma once

/**
 * @file
 * @brief JSON serialization of co-design solutions.
 *
 * Non-finite numbers (an infeasible link's residuals) are written as the
 * strings "inf", "-inf" and "nan" because JSON has no literal for them.
 */

#include <filesystem>
#include <stdexcept>
#include <string>

#include "codesign.hpp"

namespace csc {

/// Malformed or incompatible solution file.
class SolutionFormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

std::string solution_to_json(const CodesignSolution & sol);

/// @throws SolutionFormatError on parse errors, missing fields or a tool_version mismatch.
CodesignSolution solution_from_json(const std::string & text);

void write_solution(const std::filesystem::path & path, const CodesignSolution & sol);

CodesignSolution read_solution(const std::filesystem::path & path);

}  // namespace csc
