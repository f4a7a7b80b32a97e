#pragma once

#include <iosfwd>

namespace fpt::cli {

// Exit codes: 0 success, 2 configuration, 3 data, 4 numerical.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fpt::cli
