#pragma once

#include <string>
#include <vector>

namespace clpc {

// Full command-line entry point (argv without the program name). Returns the
// process exit code: 0 ok, 1 usage, 2 data, 3 compute/internal.
int run_cli(const std::vector<std::string>& args);

} // namespace clpc
