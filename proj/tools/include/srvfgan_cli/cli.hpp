#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace srvfgan::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

/// Runs the srvfgan command line on `args` (without the program name).
/// Help and version go to `out`; logs and diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace srvfgan::cli
