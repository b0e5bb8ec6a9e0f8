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

#ifndef RELNAS_TOOLS_COMMANDS_HPP_
#define RELNAS_TOOLS_COMMANDS_HPP_

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "relnas/graph.hpp"
#include "relnas/proliferate.hpp"
#include "relnas/train.hpp"

namespace relnas::cli {

using nlohmann::json;

// Synthetic dataset recipe for gen-data.
struct DataSpec {
  std::string kind = "sbm";  // sbm | edge | graph_reg
  SbmParams sbm;
  int n_min = 6;
  int n_max = 14;
  int train = 60;
  int val = 20;
  int test = 20;
};

// Candidate-count query for audit.
struct AuditSpec {
  std::string mode = "proliferation";  // cell | proliferation
  int n_vertices = 16;
  int num_ops = 8;
  int cells = 1;
  int verts_per_cell = 4;
  bool dual = false;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "relnas_out";
  std::optional<std::filesystem::path> dataset;
  std::optional<std::filesystem::path> arch;
  std::optional<std::filesystem::path> checkpoint;
  DataSpec data;
  ProliferationPlan plan;
  RetrainConfig train;
  AuditSpec audit;
  std::string export_format = "dot";  // dot | json
  double scale = 1.0;
};

// Command-line values; each one overrides the matching config key.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> scale;
  std::optional<std::string> dataset;
  std::optional<std::string> arch;
  std::optional<std::string> checkpoint;
  std::optional<std::string> format;
  std::optional<std::string> kind;
  std::optional<std::string> mode;
};

// Raised for schema violations, unknown keys and missing inputs; reported
// before any computation starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> k = {"gen-data", "search", "train",
                                             "eval",     "audit",  "export"};
  return k;
}

// Strict parse of a config document: every key must be known and typed.
RunConfig parse_config(const std::string& text);
// Merges config file < RELNAS_OUT < flags, applies the epoch scale and
// checks what `command` needs (seed, input files, value ranges).
RunConfig resolve(const std::string& command, const Overrides& o);

// JSON-lines events to `out`, human summaries to `err`; safe to share
// between concurrent runs.
class Logger {
 public:
  Logger(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}
  // Same streams and lock, every event tagged with the run's seed.
  Logger tagged(std::uint64_t seed) const;
  void event(json j);
  void line(const std::string& json_line);
  void summary(const std::string& text);
  LogFn fn() {
    return [this](const std::string& s) { line(s); };
  }

 private:
  Logger(std::ostream& out, std::ostream& err, std::shared_ptr<std::mutex> mu,
         std::optional<std::uint64_t> seed)
      : out_(out), err_(err), mu_(std::move(mu)), seed_(seed) {}
  std::ostream& out_;
  std::ostream& err_;
  std::shared_ptr<std::mutex> mu_ = std::make_shared<std::mutex>();
  std::optional<std::uint64_t> seed_;
};

// Each command writes its artifacts under c.out and returns a summary.
json cmd_gen_data(const RunConfig& c, Logger& log);
json cmd_search(const RunConfig& c, Logger& log);
json cmd_train(const RunConfig& c, Logger& log);
json cmd_eval(const RunConfig& c, Logger& log);
json cmd_audit(const RunConfig& c, Logger& log);
json cmd_export(const RunConfig& c, Logger& log);

// Resolves the configuration and runs `command`, once or once per entry of
// `seeds` (concurrently, each into <out>/seed_<s>). Returns the exit code:
// 0 on success, 2 for configuration errors, 1 for failures during the run.
int run(const std::string& command, const Overrides& o, const std::vector<std::uint64_t>& seeds,
        std::ostream& out, std::ostream& err);

}  // namespace relnas::cli

#endif  // RELNAS_TOOLS_COMMANDS_HPP_
