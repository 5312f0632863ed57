#pragma once

#include <string>
#include <vector>

namespace opgd::cli {

enum ExitCode : int {
  kSuccess = 0,
  kRuntimeFailure = 1,
  kUsageError = 2,
  kDiverged = 3,
  kVerificationFailed = 4,
};

/// Entry point shared by the `opgd` binary and the tests. `args` excludes the
/// program name. Subcommands: gen, train, verify, experiment.
int run(const std::vector<std::string>& args);

}  // namespace opgd::cli
