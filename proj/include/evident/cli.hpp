#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evident::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;

// Runs one command. `args` excludes the program name. Returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Build identification recorded in run manifests.
const char* git_describe();

}  // namespace evident::cli
