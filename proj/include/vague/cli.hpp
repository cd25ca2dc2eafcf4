#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace vague::cli {

// Parses and executes one command line (program name excluded). Returns the
// process exit code: 0 success, 1 usage error, 2 data error, 3 numerical
// divergence. Reports and errors go to the given streams.
int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace vague::cli
