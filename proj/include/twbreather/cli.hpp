#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twb {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  /// A self-check (oracle, convergence) ran but did not pass.
  kExitCheckFailed = 1,
  /// Bad flags, unreadable or invalid configuration.
  kExitUsage = 2,
  kExitIo = 3,
  /// Integration, numerical or ensemble failure during a run.
  kExitRuntime = 4,
};

/// Subcommands: run, meanfield, converge, oracle. args[0] is the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace twb
