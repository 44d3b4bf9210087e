#pragma once

namespace loadgen::cli {

// Exit codes: 0 success, 1 internal or numeric failure, 2 usage or input error.
int run(int argc, const char* const* argv);

} // namespace loadgen::cli
