#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace climsom::cli {

// Runs one command line (args[0] is the program name). Errors are written
// to `err` as a JSON envelope {code, message} and yield a non-zero status.
int run(std::vector<std::string> const& args, std::ostream& out, std::ostream& err);

}  // namespace climsom::cli
