#ifndef TELEOP_TOOLS_CLI_HPP
#define TELEOP_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>

namespace teleop::cli {

inline constexpr const char* tool_version = "0.1.0";

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_numeric = 3 };

/// Runs one command line (argv[0] is the program name) and returns the exit
/// code.  Diagnostics go to `err`, progress to `out` unless --quiet.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace teleop::cli

#endif
