#pragma once

namespace splab {

// Parses argv, dispatches the subcommand, maps errors to exit codes:
// 0 success (including help), 2 configuration/usage, 3 numeric failure.
int run_cli(int argc, char** argv);

}  // namespace splab
