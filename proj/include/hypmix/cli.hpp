#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hypmix {

// Exit codes of the command-line front end.
enum ExitCode : int {
    exit_ok = 0,
    exit_check_failed = 1,
    exit_usage = 2,
    exit_numeric_abort = 3,
};

// Parses args (without the program name) and runs one subcommand. Reports go
// to out, diagnostics to err.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hypmix
