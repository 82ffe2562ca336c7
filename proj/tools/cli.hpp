#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitTraining = 3;

// Parses `args` (without the program name), runs the subcommand and maps
// failures to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctc::cli
