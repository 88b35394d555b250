#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace statenet::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kData = 2,
  kDivergence = 3,
};

// Runs one command line (without the program name) and returns the exit code.
// Normal output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace statenet::cli
