#pragma once

#include <iosfwd>

namespace powerlearn::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kNumerical = 3,
};

/// Entry point of the `powerlearn` executable. Diagnostics go to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace powerlearn::cli
