#pragma once

#include "config.hpp"
#include "output.hpp"

namespace rmtu::cli {

/// Runs the configured subcommand and writes its artifacts. Returns the
/// process exit status; library failures propagate as rmtu::Error.
int run_command(const Config& cfg, const OutputDir& out);

/// Fast invariant checks shared by the selftest subcommand. Each entry has
/// name, passed and detail fields.
Json run_selftest();

}  // namespace rmtu::cli
