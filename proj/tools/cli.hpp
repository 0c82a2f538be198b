#pragma once

namespace yieldnet::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;  // bad flags and contract violations
inline constexpr int kExitIo = 2;     // unreadable input, malformed CSV, write failures

/// Runs one command line. Logs go to stderr, the one-line summary to stdout.
int run(int argc, const char* const* argv);

}  // namespace yieldnet::cli
