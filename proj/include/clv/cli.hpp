#pragma once

#include <iosfwd>

namespace clv {

// Exit codes of the clverify tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3 };

// Entry point of clverify; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace clv
