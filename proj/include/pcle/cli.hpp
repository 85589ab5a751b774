#pragma once

#include <ostream>

namespace pcle::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // usage, configuration or I/O problems
inline constexpr int kExitNumeric = 3;  // divergence or other numeric failure

/// Entry point of the `pcle` command; never throws.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pcle::cli
