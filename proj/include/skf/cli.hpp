// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "skf/error.hpp"

namespace skf {

enum ExitCode { kExitOk = 0, kExitUsage = 1, kExitIo = 2, kExitNumeric = 3 };

ExitCode exit_code_for(Errc code);

// Runs one `skf` invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skf
