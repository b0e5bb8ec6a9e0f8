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

#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "doctest.h"
#include "relnas/proliferate.hpp"

namespace relnas::cli {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("relnas_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Tokenizer and recursive-descent parser for the DOT subset graphviz accepts:
// digraph ID { stmt_list } with node, edge, attribute, assignment and
// subgraph statements.
class DotParser {
 public:
  explicit DotParser(const std::string& text) { tokenize(text); }

  bool parse() {
    pos_ = 0;
    if (!accept("digraph")) return false;
    accept_id();
    if (!accept("{") || !stmt_list()) return false;
    return accept("}") && pos_ == tok_.size();
  }
  int edges() const { return edges_; }
  int nodes() const { return nodes_; }

 private:
  void tokenize(const std::string& s) {
    for (std::size_t i = 0; i < s.size();) {
      const char c = s[i];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++i;
      } else if (c == '"') {
        std::size_t j = i + 1;
        while (j < s.size() && s[j] != '"') j += s[j] == '\\' ? 2 : 1;
        if (j >= s.size()) {
          tok_.push_back("<unterminated>");
          return;
        }
        tok_.push_back(s.substr(i, j - i + 1));
        i = j + 1;
      } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '>') {
        tok_.push_back("->");
        i += 2;
      } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.') {
        std::size_t j = i;
        while (j < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.'))
          ++j;
        tok_.push_back(s.substr(i, j - i));
        i = j;
      } else {
        tok_.push_back(std::string(1, c));
        ++i;
      }
    }
  }
  const std::string& peek() const {
    static const std::string end;
    return pos_ < tok_.size() ? tok_[pos_] : end;
  }
  bool accept(const std::string& t) {
    if (peek() != t) return false;
    ++pos_;
    return true;
  }
  static bool is_id(const std::string& t) {
    if (t.empty()) return false;
    if (t.front() == '"') return t.size() >= 2 && t.back() == '"';
    for (char c : t)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
    return true;
  }
  bool accept_id() {
    if (!is_id(peek()) || peek() == "subgraph" || peek() == "digraph") return false;
    ++pos_;
    return true;
  }
  bool attr_list() {
    while (accept("[")) {
      while (!accept("]")) {
        if (!accept_id() || !accept("=") || !accept_id()) return false;
        accept(",") || accept(";");
      }
    }
    return true;
  }
  bool stmt_list() {
    while (peek() != "}" && !peek().empty()) {
      if (!stmt()) return false;
      accept(";");
    }
    return true;
  }
  bool stmt() {
    if (accept("subgraph")) {
      accept_id();
      return accept("{") && stmt_list() && accept("}");
    }
    if (peek() == "graph" || peek() == "node" || peek() == "edge") {
      ++pos_;
      return attr_list();
    }
    if (!accept_id()) return false;
    if (accept("=")) return accept_id();
    if (accept("->")) {
      if (!accept_id()) return false;
      ++edges_;
      while (accept("->")) {
        if (!accept_id()) return false;
        ++edges_;
      }
      return attr_list();
    }
    ++nodes_;
    return attr_list();
  }

  std::vector<std::string> tok_;
  std::size_t pos_ = 0;
  int edges_ = 0;
  int nodes_ = 0;
};

RunConfig tiny_search_config(const fs::path& root, std::uint64_t seed) {
  RunConfig c = parse_config(R"({
    "version": 1,
    "data": {"n": 30, "k": 3, "train": 4, "val": 2, "test": 2},
    "plan": {"target_size": 2, "d_v": 4, "d_e": 4, "epochs": [2, 2]},
    "strategy": {"kind": "random", "warmup_epochs": 0, "decide_every": 1}
  })");
  c.seed = seed;
  c.out = root / "data";
  std::ostringstream out, err;
  Logger log(out, err);
  cmd_gen_data(c, log);
  c.dataset = root / "data" / "dataset.json";
  c.out = root / "search";
  return c;
}

TEST_CASE("DOT parser rejects malformed input") {
  CHECK(DotParser("digraph g { a -> b [label=\"x\"]; }").parse());
  CHECK_FALSE(DotParser("digraph g { a -> ; }").parse());
  CHECK_FALSE(DotParser("digraph g { a -> b [label=]; }").parse());
  CHECK_FALSE(DotParser("digraph g { a -> b ").parse());
  CHECK_FALSE(DotParser("graph g { a }").parse());
  CHECK_FALSE(DotParser("digraph g { \"a -> b; }").parse());
}

TEST_CASE("audit reports the cell-mode count") {
  const fs::path root = scratch("audit_cell");
  RunConfig c = parse_config(R"({"version": 1, "audit": {"mode": "cell", "cells": 4,
                                 "verts_per_cell": 4, "num_ops": 8}})");
  c.out = root;
  std::ostringstream out, err;
  Logger log(out, err);
  json rep = cmd_audit(c, log);
  CHECK(rep["candidates"] == "3019898880");
  CHECK(slurp(root / "audit_report.json").find("3019898880") != std::string::npos);
  CHECK(out.str().find("3019898880") != std::string::npos);
  CHECK(err.str().find("3019898880") != std::string::npos);
}

TEST_CASE("audit reports the proliferation count and the linear bound") {
  const fs::path root = scratch("audit_prolif");
  RunConfig c = parse_config(R"({"version": 1, "audit": {"n_vertices": 16}})");
  c.out = root;
  std::ostringstream out, err;
  Logger log(out, err);
  json rep = cmd_audit(c, log);
  const BigInt want = boost::multiprecision::pow(BigInt(192), 16);
  CHECK(rep["candidates"] == want.str());
  CHECK(rep["iterations"].size() == 4);
  CHECK(rep["total_primitives"] == 26 + 52 + 104 + 208);
  CHECK(rep["linear_bound"] == 26 * 16);
  CHECK(rep["within_bound"] == true);
}

TEST_CASE("audit of a saved architecture counts its links") {
  const fs::path root = scratch("audit_arch");
  ProliferationPlan plan;
  plan.target_size = 4;
  plan.epochs = {1, 1, 1};
  ArchDag a = proliferation_loop(plan, [](const ArchDag& s, int phase) {
                return random_strategy(s, 5 + static_cast<std::uint64_t>(phase));
              }).arch;
  save_arch(root / "arch.json", a);
  RunConfig c = parse_config(R"({"version": 1})");
  c.arch = root / "arch.json";
  c.out = root;
  std::ostringstream out, err;
  Logger log(out, err);
  json rep = cmd_audit(c, log);
  CHECK(rep["arch"]["n_vertices"] == 4);
  CHECK(rep["arch"]["node"]["fixed"] == 8);
  CHECK(rep["arch"]["relation"]["mixtures"] == 0);
}

TEST_CASE("search with the random strategy on a tiny SBM") {
  const fs::path root = scratch("search");
  RunConfig c = tiny_search_config(root, 7);
  std::ostringstream out, err;
  Logger log(out, err);
  json j = cmd_search(c, log);
  CHECK(j["n_vertices"] == 2);
  ArchDag a = load_arch(root / "search" / "arch.json");
  CHECK(violations(a).empty());
  CHECK_FALSE(a.has_mixtures());
  CHECK(a.n_vertices() == 2);
  json audit = json::parse(slurp(root / "search" / "audit.json"));
  CHECK(audit["iterations"][0]["fixed"] == 2);
  CHECK(audit["iterations"][0]["mixtures"] == 3);
  // Every stdout line is one JSON object.
  std::istringstream lines(out.str());
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) CHECK(json::parse(line).is_object());
  CHECK(n >= 3);
}

TEST_CASE("exported DOT of a size-4 architecture parses") {
  const fs::path root = scratch("export");
  ProliferationPlan plan;
  plan.target_size = 4;
  plan.epochs = {1, 1, 1};
  ArchDag a = proliferation_loop(plan, [](const ArchDag& s, int phase) {
                return random_strategy(s, 11 + static_cast<std::uint64_t>(phase));
              }).arch;
  save_arch(root / "arch.json", a);
  RunConfig c = parse_config(R"({"version": 1, "export": {"format": "dot"}})");
  c.arch = root / "arch.json";
  c.out = root / "out";
  std::ostringstream out, err;
  Logger log(out, err);
  cmd_export(c, log);
  DotParser p(slurp(root / "out" / "arch.dot"));
  REQUIRE(p.parse());
  CHECK(p.edges() == 2 * 2 * 4);
  CHECK(p.nodes() == 2 * 6);

  c.export_format = "json";
  cmd_export(c, log);
  CHECK(slurp(root / "out" / "arch.json") == slurp(root / "arch.json"));
}

TEST_CASE("commands are idempotent") {
  const fs::path root = scratch("idempotent");
  RunConfig c = tiny_search_config(root, 3);
  const std::string data = slurp(root / "data" / "dataset.json");
  RunConfig again = c;
  again.out = root / "data2";
  {
    std::ostringstream out, err;
    Logger log(out, err);
    cmd_gen_data(again, log);
  }
  CHECK(slurp(root / "data2" / "dataset.json") == data);

  c.plan.strategy.kind = StrategyKind::kSgasLite;
  c.plan.strategy.batch_size = 2;
  std::string first_log, first_arch, first_audit;
  c.out = root / "search";
  for (int run = 0; run < 2; ++run) {
    std::ostringstream out, err;
    Logger log(out, err);
    cmd_search(c, log);
    const std::string arch = slurp(root / "search" / "arch.json");
    const std::string audit = slurp(root / "search" / "audit.json");
    if (run == 0) {
      first_log = out.str();
      first_arch = arch;
      first_audit = audit;
    } else {
      CHECK(out.str() == first_log);
      CHECK(arch == first_arch);
      CHECK(audit == first_audit);
    }
  }

  c.arch = root / "search" / "arch.json";
  c.train.epochs = 2;
  for (int run = 0; run < 2; ++run) {
    c.out = root / ("train" + std::to_string(run));
    std::ostringstream out, err;
    Logger log(out, err);
    cmd_train(c, log);
  }
  CHECK(slurp(root / "train0" / "metrics.json") == slurp(root / "train1" / "metrics.json"));
  CHECK(slurp(root / "train0" / "checkpoint.json.bin") ==
        slurp(root / "train1" / "checkpoint.json.bin"));

  c.checkpoint = root / "train0" / "checkpoint.json";
  c.out = root / "eval";
  std::ostringstream out, err;
  Logger log(out, err);
  json m = cmd_eval(c, log);
  json trained = json::parse(slurp(root / "train0" / "metrics.json"));
  CHECK(m["test"]["value"] == trained["test"]["value"]);
}

TEST_CASE("config parsing is strict") {
  auto message = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"version": 1})").empty());
  CHECK(message(R"({})").find("version") != std::string::npos);
  CHECK(message(R"({"version": 2})").find("not supported") != std::string::npos);
  CHECK(message(R"({"version": 1, "strategy": {"lr": 0.1}})").find("strategy.lr") !=
        std::string::npos);
  CHECK(message(R"({"version": 1, "seeds": 1})").find("'seeds'") != std::string::npos);
  CHECK(message(R"({"version": 1, "train": {"epochs": "ten"}})").find("train.epochs") !=
        std::string::npos);
  CHECK(message(R"({"version": 1, "data": {"n": 10, "k": 3}})").find("divide") !=
        std::string::npos);
  CHECK(message(R"({"version": 1, "plan": {"target_size": 8, "epochs": [5, 5]}})")
            .find("epoch budgets") != std::string::npos);
  CHECK(message(R"({"version": 1, "strategy": {"kind": "evolution"}})")
            .find("strategy.kind") != std::string::npos);
  CHECK(message(R"({"version": 1, "export": {"format": "svg"}})").find("export.format") !=
        std::string::npos);
  CHECK(message(R"({"version": 1,)").find("malformed") != std::string::npos);
}

TEST_CASE("configuration errors are raised before computing") {
  const fs::path root = scratch("errors");
  Overrides o;
  o.out = (root / "never").string();
  CHECK_THROWS_AS(resolve("gen-data", o), ConfigError);  // no seed
  o.seed = 1;
  CHECK_THROWS_AS(resolve("search", o), ConfigError);  // no dataset
  o.dataset = (root / "missing.json").string();
  CHECK_THROWS_AS(resolve("search", o), ConfigError);
  CHECK_THROWS_AS(resolve("fly", o), ConfigError);

  std::ostringstream out, err;
  CHECK(run("search", o, {}, out, err) == 2);
  CHECK_FALSE(fs::exists(root / "never"));
  json e = json::parse(out.str());
  CHECK(e["event"] == "error");
  CHECK(e["kind"] == "config");
  CHECK(err.str().find("missing.json") != std::string::npos);
}

TEST_CASE("flags override the config and the output variable") {
  const fs::path root = scratch("precedence");
  write(root / "c.json", R"({"version": 1, "seed": 4, "out": "from_config",
                            "plan": {"epochs": [10, 20, 30]},
                            "strategy": {"warmup_epochs": 4, "decide_every": 2},
                            "train": {"epochs": 100, "patience": 20}})");
  Overrides o;
  o.config = root / "c.json";
  ::unsetenv("RELNAS_OUT");
  CHECK(resolve("audit", o).out == "from_config");
  ::setenv("RELNAS_OUT", (root / "env").c_str(), 1);
  CHECK(resolve("audit", o).out == root / "env");
  o.out = "flag";
  CHECK(resolve("audit", o).out == "flag");
  ::unsetenv("RELNAS_OUT");

  CHECK(*resolve("gen-data", o).seed == 4);
  o.seed = 9;
  CHECK(*resolve("gen-data", o).seed == 9);

  o.scale = 0.1;
  RunConfig c = resolve("gen-data", o);
  CHECK(c.plan.epochs == std::vector<int>{1, 2, 3});
  CHECK(c.plan.strategy.warmup_epochs == 0);
  CHECK(c.plan.strategy.decide_every == 1);
  CHECK(c.train.epochs == 10);
  CHECK(c.train.patience == 2);
  o.scale = -1.0;
  CHECK_THROWS_AS(resolve("gen-data", o), ConfigError);
}

TEST_CASE("seed fan-out writes one directory per seed") {
  const fs::path root = scratch("fanout");
  write(root / "c.json", R"({"version": 1, "data": {"n": 12, "k": 3, "train": 2, "val": 1,
                            "test": 1}})");
  Overrides o;
  o.config = root / "c.json";
  o.out = (root / "runs").string();
  std::ostringstream out, err;
  CHECK(run("gen-data", o, {1, 2, 3}, out, err) == 0);
  for (int s : {1, 2, 3}) {
    const fs::path p = root / "runs" / ("seed_" + std::to_string(s)) / "dataset.json";
    CHECK(fs::exists(p));
    Overrides single = o;
    single.seed = s;
    single.out = (root / ("single_" + std::to_string(s))).string();
    std::ostringstream o2, e2;
    CHECK(run("gen-data", single, {}, o2, e2) == 0);
    CHECK(slurp(p) == slurp(root / ("single_" + std::to_string(s)) / "dataset.json"));
  }
  std::istringstream lines(out.str());
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) CHECK(json::parse(line).contains("seed"));
  CHECK(n == 3);
}

int shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_CASE("binary exit codes") {
  const char* bin = std::getenv("RELNAS_CLI");
  if (bin == nullptr) {
    MESSAGE("RELNAS_CLI not set; skipping the binary checks");
    return;
  }
  const fs::path root = scratch("binary");
  const std::string b = std::string("'") + bin + "'";
  const std::string o = " --out '" + root.string() + "'";
  CHECK(shell(b + o + " --mode cell audit > '" + (root / "log").string() + "' 2>/dev/null") == 0);
  CHECK(slurp(root / "log").find("3019898880") != std::string::npos);
  write(root / "bad.json", R"({"version": 1, "audit": {"mode": "cells"}})");
  CHECK(shell(b + o + " --config '" + (root / "bad.json").string() + "' audit > '" +
              (root / "err").string() + "' 2>/dev/null") == 2);
  CHECK(json::parse(slurp(root / "err"))["kind"] == "config");
  CHECK(shell(b + o + " fly > /dev/null 2>&1") == 2);
  CHECK(shell(b + " --help > /dev/null 2>&1") == 0);
}

}  // namespace
}  // namespace relnas::cli
