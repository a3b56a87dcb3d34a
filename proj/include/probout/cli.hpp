#pragma once

#include <string>
#include <vector>

namespace probout {

/// Runs one subcommand. args[0] is the program name. Returns the process
/// exit code; errors are reported on stderr.
int cli_main(const std::vector<std::string>& args);
int cli_main(int argc, char** argv);

}  // namespace probout
