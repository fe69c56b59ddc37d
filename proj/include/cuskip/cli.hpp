#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cuskip::cli {

// Entry point of the cuskip binary. Exit codes: 0 success, 2 usage error or
// refused overwrite, 3 data or configuration error, 4 pruning produced no
// criteria, 5 rerun output differs from its manifest.
int run(int argc, char** argv);

// Same, with arguments excluding the program name and explicit streams.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cuskip::cli
