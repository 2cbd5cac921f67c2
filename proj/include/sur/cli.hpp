#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sur {

// Exit codes: 0 success or --help, 1 runtime failure, 2 unknown subcommand,
// 3 invalid or missing input.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitInvalid = 3;

// args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string usage();

}  // namespace sur
