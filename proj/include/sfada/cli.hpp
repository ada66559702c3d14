#pragma once
#include <string>
#include <vector>

namespace sfada {

// Full command-line entry point. Returns the process exit code: 0 success,
// 1 usage error, 2 data error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

// In-process variant; args exclude the program name.
int run_cli(const std::vector<std::string>& args);

}  // namespace sfada
