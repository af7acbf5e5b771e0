#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pauseflow {

/// Entry point for the `pauseflow` tool. args[0] is the program name.
/// Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pauseflow
