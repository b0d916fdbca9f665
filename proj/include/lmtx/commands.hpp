#pragma once

#include <iosfwd>
#include <string>

#include "lmtx/config.hpp"
#include "lmtx/error.hpp"

namespace lmtx {

// Executes one subcommand (ingest, train, infer, eval, cache-stats, synth,
// sweep) against a resolved configuration; summaries and reports go to out.
// Throws Error on failure.
void run_command(const std::string& command, const RunConfig& cfg, std::ostream& out);

// Process exit code for a failure: 1 usage, 2 data, 3 remote teacher.
int exit_code_for(ErrorCode code);

}  // namespace lmtx
