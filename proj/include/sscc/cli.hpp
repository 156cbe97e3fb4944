#pragma once

#include <ostream>

namespace sscc {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2 };

/// Entry point of the `sscc` tool: synth, train, cluster, eval, ablate and
/// augment-preview. Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sscc
