// Copyright 2026 The dnest Authors
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

// Command-line front end. Every subcommand reads a JSON config, applies flag
// overrides, and writes its artifacts plus manifest.json and
// config.resolved.json into the output directory.

#ifndef DNEST_CLI_HPP_
#define DNEST_CLI_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dnest/config.hpp"

namespace dnest::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> parallel;

  // Writes the set overrides into a config document; returns what was applied.
  Json apply(Json& doc) const;
};

struct CommandArgs {
  std::string config_path;
  std::string out_dir = "out";
  Overrides overrides;
};

// Exit status: 0 ok, 1 runtime failure or failed certificate, 2 invalid
// arguments or config.
int cmd_gen_graph(const CommandArgs& args, std::ostream& out, std::ostream& err);
int cmd_gen_partition(const CommandArgs& args, std::ostream& out, std::ostream& err);
int cmd_run(const CommandArgs& args, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandArgs& args, std::ostream& out, std::ostream& err);
int cmd_certify(const CommandArgs& args, std::ostream& out, std::ostream& err);
int cmd_rideshare(const CommandArgs& args, std::ostream& out, std::ostream& err);

// argv-style entry point (argv[0] is the program name).
int run_cli(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace dnest::cli

#endif  // DNEST_CLI_HPP_
