#ifndef SACNET_CLI_HPP_
#define SACNET_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace sacnet {

// Exit codes shared by every subcommand.
enum ExitCode {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

// Runs the sacnet command line (args excludes the program name). Progress
// goes to out, diagnostics to err; the last line on out is a JSON status
// object.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace sacnet

#endif  // SACNET_CLI_HPP_
