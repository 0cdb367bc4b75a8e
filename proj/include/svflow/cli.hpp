#pragma once

#include <ostream>

namespace svf {

// Subcommands: gen-insilico, train, register, evaluate, analyze, calibrate.
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace svf
