#pragma once

#include <ostream>

namespace gmmsum {

// Entry point of the gmmsum command line tool. Returns the process exit code;
// errors are reported on err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gmmsum
