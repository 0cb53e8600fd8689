#pragma once

#include <ostream>

namespace popleader::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kCheckFailed = 2,
    kInconclusive = 3,
};

/// Entry point of the `popleader` tool. Reports go to `out` unless --out
/// names a file; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace popleader::cli
