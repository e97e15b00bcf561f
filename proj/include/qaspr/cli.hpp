#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qaspr {

// Entry point for the `qaspr` tool. args excludes the program name. Returns
// the process exit code; failures print one "error: <kind>: <message>" line.
int run_cli(const std::vector<std::string>& args);
// Same, with command results written to out instead of stdout.
int run_cli(const std::vector<std::string>& args, std::ostream& out);

}  // namespace qaspr
