// Copyright 2026 The panclust Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace panclust {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIo = 2 };

/// Runs one command line (args[0] is the program name). Output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception (lowest index) is
/// rethrown after all workers finish.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace panclust
