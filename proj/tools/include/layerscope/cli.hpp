#pragma once

#include <ostream>

namespace layerscope::cli {

// Parses argv and runs one subcommand. Returns the process exit code:
// 0 success, 1 computation error, 2 usage or I/O error. Errors are written
// to `err` as a single `E:<module>:<code>: <message>` line.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace layerscope::cli
