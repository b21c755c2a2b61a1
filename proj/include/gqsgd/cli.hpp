#pragma once

namespace gqsgd {

// Entry point behind the `gqsgd` binary, exposed so tests can drive the
// command surface in-process. Returns the process exit code: 0 success,
// 1 failed verification checks, 2 usage/configuration/protocol errors.
int cli_main(int argc, const char* const* argv);

}  // namespace gqsgd
