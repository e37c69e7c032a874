#pragma once

#include <ostream>

namespace optospike {

// Exit codes: 0 ok, 1 verification failure, 2 usage or config error, 3 solver failure.
enum ExitCode { kExitOk = 0, kExitVerify = 1, kExitUsage = 2, kExitSolver = 3 };

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace optospike
