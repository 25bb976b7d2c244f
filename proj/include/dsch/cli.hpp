#pragma once

#include <iosfwd>

namespace dsch::cli {

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;

/// Entry point shared by the `dsch` executable and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dsch::cli
