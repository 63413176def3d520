#pragma once

#include <iosfwd>

namespace gdl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `gdl` invocation (argv[0] is the program name). Human-readable
/// output goes to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gdl::cli
