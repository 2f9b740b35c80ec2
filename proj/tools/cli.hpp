#pragma once

#include <iosfwd>

namespace cpo::cli {

// Exit codes: 0 success, 1 usage, 2 data, 3 numerical or infeasible.
enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

int run_cli(int argc, const char* const* argv);
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cpo::cli
