#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace cfx::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Entry point shared by the `cfx` binary and the tests. `args` excludes the
// program name. Subcommands: train, explain, evaluate, serve.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace cfx::cli
