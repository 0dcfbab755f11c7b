#pragma once

#include <ostream>

namespace edgetrace {

// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `edgetrace` tool:
///   render | grad-image | fd-check | optimize
int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace edgetrace
