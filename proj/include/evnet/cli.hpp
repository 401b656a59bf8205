#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace evnet {

inline constexpr const char* kOutDirEnv = "EVNET_OUT_DIR";
inline constexpr const char* kDefaultOutDir = "evnet-out";

// Runs the command line `args` (args[0] is the program name). Errors are
// written to `err` as one JSON object {code, message, context}. Returns 0 on
// success, 2 for usage errors and 1 for every other failure.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace evnet
