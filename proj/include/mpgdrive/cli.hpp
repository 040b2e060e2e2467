#pragma once

#include <iosfwd>

namespace mpgdrive::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;  // verification or metric check failed
inline constexpr int kExitUsage = 2;    // bad flags, config or input files

/// Entry point of the `mpgdrive` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mpgdrive::cli
