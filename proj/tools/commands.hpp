#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fads::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

/// Parses argv (program name first) and dispatches a subcommand. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fads::cli
