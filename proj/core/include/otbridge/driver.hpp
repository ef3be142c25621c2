#pragma once

#include <string>
#include <vector>

namespace otbridge {

/// CLI entry point shared by the otbridge binary and the tests. `args`
/// excludes the program name. Exit codes: 0 success, 1 non-convergence or
/// out-of-tolerance compare, 2 configuration error, 3 numerical failure.
int run_command(const std::vector<std::string>& args);

}  // namespace otbridge
