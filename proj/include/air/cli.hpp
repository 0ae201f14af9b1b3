#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace air {

/// Exit codes of the command-line front end.
enum ExitCode : int { exit_ok = 0, exit_runtime = 1, exit_config = 2, exit_audit = 3 };

/// Entry point of the `air` tool. Subcommands: run, replicate, analyze,
/// decompose, schedule, counterexample, sweep.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace air
