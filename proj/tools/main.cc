// Copyright 2026 The relnas Authors.
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

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  using relnas::cli::Overrides;
  CLI::App app{"relnas: relation-aware graph architecture search"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  std::vector<std::uint64_t> seeds;
  std::string config, out;
  std::uint64_t seed = 0;
  double scale = 1.0;
  auto* c_opt = app.add_option("--config", config, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "Run seed");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* scale_opt = app.add_option("--scale", scale, "Epoch multiplier");
  auto* seeds_opt =
      app.add_option("--seeds", seeds, "Comma-separated seeds run concurrently")->delimiter(',');
  seeds_opt->excludes(seed_opt);

  std::string dataset, arch, checkpoint, format, kind, mode;
  struct Extra {
    const char* name;
    std::string* dst;
    const char* help;
  };
  const Extra extras[] = {{"--dataset", &dataset, "Dataset JSON"},
                          {"--arch", &arch, "Architecture JSON"},
                          {"--checkpoint", &checkpoint, "Checkpoint manifest"},
                          {"--format", &format, "Export format (dot or json)"},
                          {"--kind", &kind, "Dataset kind (sbm, edge or graph_reg)"},
                          {"--mode", &mode, "Audit mode (cell or proliferation)"}};
  std::vector<CLI::Option*> extra_opts;
  for (const auto& e : extras) extra_opts.push_back(app.add_option(e.name, *e.dst, e.help));
  for (const auto& name : relnas::cli::commands()) app.add_subcommand(name, "run " + name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cout << relnas::cli::json{{"event", "error"}, {"kind", "usage"}, {"message", e.what()}}
                     .dump()
              << '\n';
    app.exit(e);
    return 2;
  }

  if (*c_opt) o.config = config;
  if (*seed_opt) o.seed = seed;
  if (*out_opt) o.out = out;
  if (*scale_opt) o.scale = scale;
  std::optional<std::string>* extra_dst[] = {&o.dataset, &o.arch, &o.checkpoint,
                                             &o.format,  &o.kind, &o.mode};
  for (std::size_t i = 0; i < extra_opts.size(); ++i)
    if (*extra_opts[i]) *extra_dst[i] = *extras[i].dst;

  return relnas::cli::run(app.get_subcommands().front()->get_name(), o, seeds, std::cout,
                          std::cerr);
}
