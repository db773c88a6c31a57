#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace geowarp::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kAlgorithm = 4 };

/// Entry point behind the `geowarp` binary. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace geowarp::cli
