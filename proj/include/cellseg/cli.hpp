#pragma once

#include <string>
#include <vector>

namespace cellseg::cli {

// Dispatches one subcommand and returns the process exit code: 0 success,
// 1 usage error, 2 data error, 3 training divergence. `args` excludes the
// program name.
int run(const std::vector<std::string>& args);

}  // namespace cellseg::cli
