#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ltn::cli {

// Runs one subcommand (synth, noise, train, eval, query). `args` excludes the
// program name. Returns the exit code: 0 success, 2 user or configuration
// error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ltn::cli
