#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace artgan::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,         // bad flags, bad values, invalid configuration
  kIo = 2,            // unreadable/unwritable files, malformed inputs
  kVerification = 3,  // gradcheck failure
};

// Runs one subcommand. `args` excludes the program name. Diagnostics go to
// `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace artgan::cli
