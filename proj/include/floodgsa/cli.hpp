#pragma once

#include <string>
#include <vector>

namespace floodgsa::cli {

/// Runs one subcommand. Returns 0 on success, 1 on a domain error and 2 on a
/// usage error (unknown subcommand, flag or malformed flag value).
int dispatch(int argc, char** argv);
int dispatch(const std::vector<std::string>& args);  // args exclude the program name

}  // namespace floodgsa::cli
