#pragma once

#include <iosfwd>

namespace craft::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `craft` tool. Returns the process exit code; on failure
/// writes exactly one JSON line {"error": kind, "message": ...} to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace craft::cli
