#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace varseg::cli {

/// `args` follows argv: args[0] is the program name.
/// Exit codes: 0 success, 2 usage error, 1 runtime error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace varseg::cli
