#pragma once

namespace dextok::cli {

/// Entry point shared by the binary and the tests.
/// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace dextok::cli
