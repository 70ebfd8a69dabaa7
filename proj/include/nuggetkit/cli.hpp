#pragma once

#include <iosfwd>

namespace nuggetkit {

/// Entry point of the `nuggetkit` command. Returns the process exit code:
/// 0 success, 1 partial failure, 2 configuration or contract error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace nuggetkit
