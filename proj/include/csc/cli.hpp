#pragma once

#include <iosfwd>

namespace csc {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,          ///< success, including an infeasible solve
  kExitUsage = 1,       ///< bad command line
  kExitValidation = 2,  ///< config, solution file or property check failure
  kExitInternal = 3,
};

/// Entry point of `csc solve | simulate | sweep | validate`.
int run_cli(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

}  // namespace csc
