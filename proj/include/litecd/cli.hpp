#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace litecd {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitDiverged = 3,
  kExitModelMismatch = 4,
};

/// Runs the `litecd` command line (args excludes the program name):
/// synth, train, infer, eval, profile.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace litecd
