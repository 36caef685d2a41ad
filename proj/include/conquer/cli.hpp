#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace conquer::cli {

//! Exit codes: 0 success, 1 usage or domain error, 2 data error,
//! 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);
int run(int argc, char** argv);

} // namespace conquer::cli
