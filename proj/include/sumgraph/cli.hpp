#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sumgraph {

// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,
  kExitData = 2,
  kExitInternal = 3,
};

// Runs `sumgraph <subcommand> ...`; args excludes the program name.
// Subcommands: gen-synth, train, eval, summarize.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sumgraph
