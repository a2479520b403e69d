#pragma once

namespace nesp::cli {

/// Entry point shared by the binary and the tests.
/// Exit codes: 0 ok, 2 usage error, 3 config error, 4 numerical failure.
int run(int argc, const char* const* argv);

}  // namespace nesp::cli
