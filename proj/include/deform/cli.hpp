#pragma once
// Command line front end. `run` is the whole program minus process setup so
// that tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace deform::cli {

enum ExitCode { kOk = 0, kUsage = 1, kValidation = 2, kConvergence = 3 };

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace deform::cli
