#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lsm::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kMissingInput = 2,
  kSchema = 3,
  kInvalidArgument = 4,
  kRuntimeFailure = 5,
};

/// Runs one `lsm` invocation. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lsm::cli
