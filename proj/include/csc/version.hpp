#pragma once

namespace csc {

/// Written into every solution file and manifest; solution files from other versions are refused.
inline constexpr const char * kToolVersion = "1.0.0";

}  // namespace csc
