#pragma once

#include <iosfwd>
#include <string>

namespace cavg::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

std::string synopsis();

/// Runs one subcommand. Failures print a single line
/// `error: code=<Code> message="<text>"` to `err`.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace cavg::cli
