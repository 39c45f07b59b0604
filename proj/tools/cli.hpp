#pragma once

#include <iosfwd>

namespace pcbev::cli {

/// Entry point for the `pcbev` tool. Results go to `out`, diagnostics to
/// `err`. Returns 0 on success, 1 on runtime errors, 2 on usage errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pcbev::cli
