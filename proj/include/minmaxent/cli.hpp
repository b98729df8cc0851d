#pragma once

#include <string>
#include <vector>

namespace mme {

/// Command-line entry point; `args` excludes the program name. Returns the
/// process exit status (0 on success). Errors print a message plus usage.
int run_cli(const std::vector<std::string>& args);

}  // namespace mme
