#pragma once

#include <iosfwd>

namespace stopflow::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int {
    exit_ok = 0,
    exit_config = 2,
    exit_convergence = 3,
    exit_property = 4,
    exit_mc = 5,
};

/**
 * Entry point behind the `stopflow` executable.
 *
 *   stopflow [-c FILE] [-o DIR] [--threads N] [--dump-config] <command> ...
 *     solve    [--method fd|closed_form|both]
 *     sweep    --param NAME --values LIST [--check CLAIM] [--method auto|fd|closed_form]
 *     mc       [--target outer|nested|composed] [--paths N] [--seed S] [--q0 LIST]
 *     figure4
 *
 * STOPFLOW_SEED overrides sim.seed from the file; --seed overrides both.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stopflow::cli
