#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmgae::cli {

enum ExitCode : int { kOk = 0, kValidationError = 1, kRuntimeFailure = 2 };

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmgae::cli
