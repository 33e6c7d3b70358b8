#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcgnn::cli {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

// Runs one command line (args exclude the program name). Diagnostics go to
// `err` as a single line; regular output goes to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcgnn::cli
