#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace panelrate {

/// Stable exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitInvariantViolation = 3,
  kExitNumericalFailure = 4,
};

/// Runs the command line `args` (args[0] is the program name). A
/// `--config file.json` anywhere on the line supplies defaults for every
/// flag; explicit flags win.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panelrate
