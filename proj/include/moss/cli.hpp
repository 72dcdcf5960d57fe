#pragma once

#include <string>
#include <vector>

namespace moss::cli {

// Exit codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace moss::cli
