#pragma once

// Command-line front end. `run` is the whole tool minus process plumbing so
// tests can drive it in-process.

#include <ostream>
#include <string>
#include <vector>

namespace distix::cli {

// Stable exit codes for scripts.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitMismatch = 4;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace distix::cli
