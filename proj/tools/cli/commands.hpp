#pragma once

#include <ostream>

namespace trapcc::cli {

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kEmpty = 4 };

/// Entry point of the `trapcc` binary. Logs go to `log`, summaries to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& log);

}  // namespace trapcc::cli
