#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace countthin::cli {

enum ExitCode : int { kSuccess = 0, kCheckFailed = 1, kUsageError = 2 };

/// Runs the command line `args` (without the program name) and returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace countthin::cli
