#pragma once

#include <ostream>

namespace etd::cli {

// Subcommands: train, eval, ablate, plot. Results go to `out`, diagnostics
// and errors to `err`. Returns 0 only when every requested artifact exists.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace etd::cli
