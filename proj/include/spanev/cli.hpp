#pragma once

#include <string>
#include <vector>

namespace spanev {

// Runs one CLI invocation (args exclude the program name). Returns the
// process exit code: 0 success, 1 input/usage error, 2 internal error.
// Logs go to stderr; data goes to files (or stdout when --out is omitted
// where that makes sense).
int run_cli(const std::vector<std::string>& args);

}  // namespace spanev
