#pragma once

#include <iosfwd>

namespace cifar {

/// Process exit codes of the `cifar` tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,       // unexpected error, oracle disagreement
  kExitInputError = 2,    // usage, configuration or trace file error
  kExitUnstable = 3,      // unstable parameters or detuning on a pole
  kExitNotConverged = 4,  // fit did not converge (report still written)
  kExitNoExtremum = 5,    // quickrate on a trace without interior extrema
};

/// Runs `cifar <subcommand> ...` with output sent to the given streams.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cifar
