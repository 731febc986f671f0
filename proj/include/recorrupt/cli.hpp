#pragma once

namespace recorrupt {

/// Entry point of the command-line tool. Returns 0 on success, 1 when a validation
/// fails (or a run errors out), 2 on a usage error.
int run_cli(int argc, const char* const* argv);

} // namespace recorrupt
