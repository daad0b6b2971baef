// ctcbias/cli.h
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

// Command-line driver: every pipeline stage as a subcommand.

#ifndef CTCBIAS_CLI_H_
#define CTCBIAS_CLI_H_

#include <ostream>

namespace ctcbias {

/// Runs one subcommand. Returns 0 on success, 2 on usage or configuration
/// errors and 1 on stage failures; failures print a one-line error JSON
/// ({"status":"error","stage","kind","field","message"}) to `err`.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace ctcbias

#endif  // CTCBIAS_CLI_H_
