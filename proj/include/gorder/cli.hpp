#pragma once

#include <iosfwd>

namespace gorder {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_pass = 0,
    exit_no_verdict = 1,
    exit_input_error = 2,
    exit_solver_failure = 3,
    exit_empirical_failure = 4,
};

/// Entry point of the gorder tool: solve, compare, example, probe, validate.
/// Reports go to `--out` (written atomically) or to `out`; diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gorder
