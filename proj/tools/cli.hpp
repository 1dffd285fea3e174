#ifndef FANET_TOOLS_CLI_HPP
#define FANET_TOOLS_CLI_HPP

#include "fanet/error.hpp"

#include <ostream>
#include <string>
#include <vector>

namespace fanet::cli {

/// 0 success, 1 usage, 2 data or format, 3 numerical failure.
int exit_code(ErrorKind kind);

/// Runs one `fanet` invocation; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fanet::cli

#endif  // FANET_TOOLS_CLI_HPP
