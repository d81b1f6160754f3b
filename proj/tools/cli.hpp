#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lanehmm::cli {

/// Runs one CLI invocation. args excludes the program name. Returns the exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lanehmm::cli
