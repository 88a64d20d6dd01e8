#pragma once

#include <iosfwd>

namespace esd {

/// Entry point of the esdsearch command. Returns the process exit code:
/// 0 success, 1 usage error, 2 data/IO/provider error.
int run_cli(int argc, const char* const* argv, std::istream& in, std::ostream& out,
            std::ostream& err);

}  // namespace esd
