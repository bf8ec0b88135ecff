// Copyright 2026 The spanlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Every subcommand is a thin wrapper over the same
// project operations the HTTP service uses.

#ifndef SPANLAB_TOOLS_CLI_H_
#define SPANLAB_TOOLS_CLI_H_

#include <ostream>
#include <string>

#include "spanlab/project.h"

namespace spanlab::cli {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

// Parses argv and runs one subcommand. Results go to `out` (or --out),
// structured errors to `err`.
int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// instance,label,source,p_<category>... with probabilities printed at full
// precision.
std::string ConsensusCsv(const Project& project);

}  // namespace spanlab::cli

#endif  // SPANLAB_TOOLS_CLI_H_
