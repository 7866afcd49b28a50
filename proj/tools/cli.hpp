#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace trimodal::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kCheckFailed = 3,
};

// Runs one subcommand. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace trimodal::cli
