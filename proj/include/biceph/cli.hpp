#pragma once

#include <string>
#include <vector>

namespace biceph::cli {

// Exit codes: 0 success, 2 usage/validation, 3 numerical failure, 4 IO.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace biceph::cli
