#pragma once

#include <string>
#include <vector>

namespace conekit::cli {

// Parses argv-style arguments and dispatches one subcommand.
// Exit codes: 0 success, 2 configuration error, 1 numerical failure.
int run(const std::vector<std::string>& args);

}  // namespace conekit::cli
