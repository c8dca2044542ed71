// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Subcommands of the zorefine tool: align, sensitivity, refine, eval,
// verify, run, check-manifest.

#ifndef ZOREFINE_TOOLS_COMMANDS_HPP_
#define ZOREFINE_TOOLS_COMMANDS_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace zorefine::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitNumeric = 3,
  kExitVerification = 4,
};

/// Full command line entry point; args[0] is the program name. Reads
/// ZOREFINE_SEED from the environment.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace zorefine::cli

#endif  // ZOREFINE_TOOLS_COMMANDS_HPP_
