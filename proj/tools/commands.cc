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

#include "commands.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "relnas/checkpoint.hpp"
#include "relnas/network.hpp"

namespace relnas::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kConfigVersion = 1;

[[noreturn]] void config_error(const std::string& what) { throw ConfigError("config: " + what); }

// Typed, strict access to one JSON object of the config.
class Section {
 public:
  Section(const json& j, std::string path, std::set<std::string> keys)
      : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error("'" + path_ + "' must be an object");
    for (const auto& [k, v] : j_.items())
      if (!keys.count(k)) config_error("unknown key '" + where(k) + "'");
  }
  bool has(const char* k) const { return j_.contains(k); }
  const json& raw(const char* k) const { return j_.at(k); }

  template <typename T>
  void get(const char* k, T& dst) const {
    if (!j_.contains(k)) return;
    const json& v = j_.at(k);
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) ok = v.is_boolean();
    else if constexpr (std::is_same_v<T, std::string>) ok = v.is_string();
    else if constexpr (std::is_integral_v<T>) ok = v.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>) ok = v.is_number();
    if (!ok) config_error("'" + where(k) + "' has the wrong type");
    dst = v.get<T>();
  }

  std::string where(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

 private:
  const json& j_;
  std::string path_;
};

int scaled(int epochs, double scale, int lo) {
  return std::max(lo, static_cast<int>(std::lround(epochs * scale)));
}

void require(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

void check_config(const RunConfig& c) {
  const DataSpec& d = c.data;
  require(d.kind == "sbm" || d.kind == "edge" || d.kind == "graph_reg",
          "data.kind must be sbm, edge or graph_reg");
  require(d.sbm.n >= 2 && d.sbm.k >= 1 && d.sbm.n % d.sbm.k == 0,
          "data.k must divide data.n (n >= 2)");
  for (double p : {d.sbm.p_intra, d.sbm.p_inter, d.sbm.hint_fraction})
    require(p >= 0.0 && p <= 1.0, "data probabilities must lie in [0, 1]");
  require(d.sbm.d_v >= 0, "data.d_v must be non-negative");
  require(d.n_min >= 3 && d.n_min <= d.n_max, "data needs 3 <= n_min <= n_max");
  require(d.train >= 0 && d.val >= 0 && d.test >= 0 && d.train + d.val + d.test >= 1,
          "data split sizes must be non-negative and not all zero");
  require(c.scale > 0.0 && std::isfinite(c.scale), "scale must be positive");
  require(c.plan.zoo.eps > 0.0 && c.plan.zoo.gauss_sigma > 0.0,
          "plan.eps and plan.gauss_sigma must be positive");
  require(c.export_format == "dot" || c.export_format == "json", "export.format must be dot or json");
  const AuditSpec& a = c.audit;
  require(a.mode == "cell" || a.mode == "proliferation", "audit.mode must be cell or proliferation");
  require(a.n_vertices >= 1 && a.num_ops >= 1 && a.cells >= 1 && a.verts_per_cell >= 1,
          "audit sizes must be positive");
  try {
    c.plan.check();
    StrategyConfig s = c.plan.strategy;
    s.epochs = std::max(s.warmup_epochs + 1, *std::max_element(c.plan.epochs.begin(),
                                                                 c.plan.epochs.end()));
    s.check();
    c.train.check();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    config_error(e.what());
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("config: cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
}

std::uint64_t need_seed(const RunConfig& c) {
  if (!c.seed) config_error("a seed is required (config 'seed' or --seed)");
  return *c.seed;
}

json metrics_json(const Metrics& m) {
  return {{"metric", m.name}, {"value", m.value}, {"loss", m.loss}};
}

std::string approx(const BigInt& v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2Le", v.convert_to<long double>());
  return buf;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    config_error("malformed JSON at byte " + std::to_string(e.byte));
  }
  Section top(j, "", {"version", "seed", "out", "dataset", "arch", "checkpoint", "scale", "data",
                      "plan", "strategy", "train", "audit", "export"});
  if (!top.has("version")) config_error("missing 'version'");
  int version = 0;
  top.get("version", version);
  if (version != kConfigVersion)
    config_error("version " + std::to_string(version) + " is not supported (expected " +
                 std::to_string(kConfigVersion) + ")");
  RunConfig c;
  if (top.has("seed")) {
    std::uint64_t s = 0;
    top.get("seed", s);
    c.seed = s;
  }
  std::string path;
  if (top.has("out")) {
    top.get("out", path);
    c.out = path;
  }
  for (auto [key, dst] : {std::pair{"dataset", &c.dataset}, std::pair{"arch", &c.arch},
                          std::pair{"checkpoint", &c.checkpoint}})
    if (top.has(key)) {
      top.get(key, path);
      *dst = path;
    }
  top.get("scale", c.scale);

  if (top.has("data")) {
    Section s(top.raw("data"), "data",
              {"kind", "n", "k", "p_intra", "p_inter", "hint_fraction", "d_v", "n_min", "n_max",
               "train", "val", "test"});
    s.get("kind", c.data.kind);
    s.get("n", c.data.sbm.n);
    s.get("k", c.data.sbm.k);
    s.get("p_intra", c.data.sbm.p_intra);
    s.get("p_inter", c.data.sbm.p_inter);
    s.get("hint_fraction", c.data.sbm.hint_fraction);
    s.get("d_v", c.data.sbm.d_v);
    s.get("n_min", c.data.n_min);
    s.get("n_max", c.data.n_max);
    s.get("train", c.data.train);
    s.get("val", c.data.val);
    s.get("test", c.data.test);
  }
  if (top.has("plan")) {
    Section s(top.raw("plan"), "plan",
              {"target_size", "epochs", "d_v", "d_e", "relation_space", "eps", "gauss_sigma"});
    s.get("target_size", c.plan.target_size);
    if (s.has("epochs")) {
      const json& e = s.raw("epochs");
      if (!e.is_array() || e.empty()) config_error("'plan.epochs' must be a non-empty array");
      c.plan.epochs.clear();
      for (const auto& x : e) {
        if (!x.is_number_integer()) config_error("'plan.epochs' must hold integers");
        c.plan.epochs.push_back(x.get<int>());
      }
    }
    s.get("d_v", c.plan.d_v);
    s.get("d_e", c.plan.d_e);
    s.get("relation_space", c.plan.relation_space);
    s.get("eps", c.plan.zoo.eps);
    s.get("gauss_sigma", c.plan.zoo.gauss_sigma);
  }
  if (top.has("strategy")) {
    Section s(top.raw("strategy"), "strategy",
              {"kind", "warmup_epochs", "decide_every", "lr_w", "momentum_w", "wd_w", "lr_alpha",
               "beta1_alpha", "beta2_alpha", "wd_alpha", "batch_size"});
    StrategyConfig& st = c.plan.strategy;
    if (s.has("kind")) {
      std::string k;
      s.get("kind", k);
      try {
        st.kind = parse_strategy(k);
      } catch (const Error& e) {
        config_error(std::string("strategy.kind: ") + e.what());
      }
    }
    s.get("warmup_epochs", st.warmup_epochs);
    s.get("decide_every", st.decide_every);
    s.get("lr_w", st.lr_w);
    s.get("momentum_w", st.momentum_w);
    s.get("wd_w", st.wd_w);
    s.get("lr_alpha", st.lr_alpha);
    s.get("beta1_alpha", st.beta1_alpha);
    s.get("beta2_alpha", st.beta2_alpha);
    s.get("wd_alpha", st.wd_alpha);
    s.get("batch_size", st.batch_size);
  }
  if (top.has("train")) {
    Section s(top.raw("train"), "train",
              {"epochs", "lr", "weight_decay", "patience", "factor", "dropout", "batch_size"});
    s.get("epochs", c.train.epochs);
    s.get("lr", c.train.lr);
    s.get("weight_decay", c.train.weight_decay);
    s.get("patience", c.train.patience);
    s.get("factor", c.train.factor);
    s.get("dropout", c.train.dropout);
    s.get("batch_size", c.train.batch_size);
  }
  if (top.has("audit")) {
    Section s(top.raw("audit"), "audit",
              {"mode", "n_vertices", "num_ops", "cells", "verts_per_cell", "dual"});
    s.get("mode", c.audit.mode);
    s.get("n_vertices", c.audit.n_vertices);
    s.get("num_ops", c.audit.num_ops);
    s.get("cells", c.audit.cells);
    s.get("verts_per_cell", c.audit.verts_per_cell);
    s.get("dual", c.audit.dual);
  }
  if (top.has("export")) {
    Section s(top.raw("export"), "export", {"format"});
    s.get("format", c.export_format);
  }
  check_config(c);
  return c;
}

RunConfig resolve(const std::string& command, const Overrides& o) {
  if (std::find(commands().begin(), commands().end(), command) == commands().end())
    config_error("unknown command '" + command + "'");
  RunConfig c = o.config ? parse_config(read_file(*o.config))
                         : parse_config("{\"version\": " + std::to_string(kConfigVersion) + "}");
  if (const char* env = std::getenv("RELNAS_OUT"); env != nullptr && *env != '\0') c.out = env;
  if (o.out) c.out = *o.out;
  if (o.seed) c.seed = *o.seed;
  if (o.scale) c.scale = *o.scale;
  if (o.dataset) c.dataset = *o.dataset;
  if (o.arch) c.arch = *o.arch;
  if (o.checkpoint) c.checkpoint = *o.checkpoint;
  if (o.format) c.export_format = *o.format;
  if (o.kind) c.data.kind = *o.kind;
  if (o.mode) c.audit.mode = *o.mode;
  check_config(c);

  // Epoch multiplier for desk runs.
  if (c.scale != 1.0) {
    for (int& e : c.plan.epochs) e = scaled(e, c.scale, 1);
    c.plan.strategy.warmup_epochs = scaled(c.plan.strategy.warmup_epochs, c.scale, 0);
    c.plan.strategy.decide_every = scaled(c.plan.strategy.decide_every, c.scale, 1);
    c.train.epochs = scaled(c.train.epochs, c.scale, 1);
    c.train.patience = scaled(c.train.patience, c.scale, 1);
  }

  const bool seeded = command == "gen-data" || command == "search" || command == "train";
  if (seeded) need_seed(c);
  auto need_file = [&](const std::optional<fs::path>& p, const char* what) {
    if (!p) config_error(std::string("'") + what + "' is required for " + command);
    if (!fs::is_regular_file(*p)) config_error(std::string(what) + " file " + p->string() + " does not exist");
  };
  if (command == "search" || command == "train" || command == "eval") need_file(c.dataset, "dataset");
  if (command == "train" || command == "eval" || command == "export") need_file(c.arch, "arch");
  if (command == "eval") need_file(c.checkpoint, "checkpoint");
  if (command == "audit" && c.arch) need_file(c.arch, "arch");
  return c;
}

Logger Logger::tagged(std::uint64_t seed) const { return Logger(out_, err_, mu_, seed); }

void Logger::event(json j) {
  if (seed_) j["seed"] = *seed_;
  std::lock_guard<std::mutex> lock(*mu_);
  out_ << j.dump() << '\n' << std::flush;
}

void Logger::line(const std::string& json_line) {
  if (!seed_) {
    std::lock_guard<std::mutex> lock(*mu_);
    out_ << json_line << '\n' << std::flush;
    return;
  }
  event(json::parse(json_line));
}

void Logger::summary(const std::string& text) {
  std::lock_guard<std::mutex> lock(*mu_);
  err_ << (seed_ ? "[seed " + std::to_string(*seed_) + "] " : std::string()) << text << '\n'
       << std::flush;
}

json cmd_gen_data(const RunConfig& c, Logger& log) {
  const std::uint64_t seed = need_seed(c);
  const DataSpec& s = c.data;
  Dataset d;
  if (s.kind == "sbm") {
    d = make_dataset(Task::kNodeCls, s.sbm.k, s.train, s.val, s.test, seed,
                     [&](std::uint64_t x) { return gen_sbm(s.sbm, x); });
  } else if (s.kind == "edge") {
    d = make_dataset(Task::kEdgeCls, 2, s.train, s.val, s.test, seed,
                     [&](std::uint64_t x) { return gen_edge_task(s.sbm, x); });
  } else {
    d = make_dataset(Task::kGraphReg, 1, s.train, s.val, s.test, seed,
                     [&](std::uint64_t x) { return gen_reg_graph(s.n_min, s.n_max, x); });
  }
  const fs::path path = c.out / "dataset.json";
  fs::create_directories(c.out);
  save_dataset(path, d);
  json j = {{"event", "gen_data"}, {"kind", s.kind}, {"task", task_name(d.task)},
            {"train", d.train.size()}, {"val", d.val.size()}, {"test", d.test.size()},
            {"path", path.string()}};
  log.event(j);
  log.summary("wrote " + std::to_string(d.train.size() + d.val.size() + d.test.size()) + " " +
              task_name(d.task) + " graphs to " + path.string());
  return j;
}

json cmd_search(const RunConfig& c, Logger& log) {
  ProliferationPlan plan = c.plan;
  plan.seed = need_seed(c);
  const Dataset d = load_dataset(*c.dataset);
  log.event({{"event", "search_start"}, {"strategy", strategy_name(plan.strategy.kind)},
             {"target_size", plan.target_size}, {"epochs", plan.epochs}});
  ProliferationResult r = proliferation_loop(plan, d, log.fn());
  for (const auto& a : r.audits)
    log.event({{"event", "audit"}, {"i", a.i}, {"fixed", a.fixed}, {"mixtures", a.mixtures},
               {"primitives", a.primitives}});
  fs::create_directories(c.out);
  save_arch(c.out / "arch.json", r.arch);
  write_file(c.out / "audit.json", audits_to_json(r.audits));
  write_file(c.out / "arch.dot", export_dot(r.arch));
  json j = {{"event", "search_done"}, {"n_vertices", r.arch.n_vertices()},
            {"arch", (c.out / "arch.json").string()}, {"audit", (c.out / "audit.json").string()}};
  log.event(j);
  log.summary("searched a " + std::to_string(r.arch.n_vertices()) + "-vertex architecture, wrote " +
              (c.out / "arch.json").string());
  return j;
}

json cmd_train(const RunConfig& c, Logger& log) {
  const std::uint64_t seed = need_seed(c);
  const Dataset d = load_dataset(*c.dataset);
  Rng rng(derive_seed(seed, 10));
  Network net(load_arch(*c.arch), spec_for(d), rng);
  TrainResult r = train_final(net, d, c.train, seed, log.fn());
  fs::create_directories(c.out);
  save_checkpoint(c.out / "checkpoint.json", net);
  json m = {{"task", task_name(d.task)},       {"val", metrics_json(r.val)},
            {"test", metrics_json(r.test)},    {"best_epoch", r.best_epoch},
            {"final_lr", r.final_lr},          {"seed", seed}};
  write_file(c.out / "metrics.json", m.dump(2));
  json j = {{"event", "train_done"}, {"metrics", m}};
  log.event(j);
  char buf[160];
  std::snprintf(buf, sizeof buf, "test %s %.4f (val %.4f, best epoch %d)", r.test.name.c_str(),
                r.test.value, r.val.value, r.best_epoch);
  log.summary(buf);
  return m;
}

json cmd_eval(const RunConfig& c, Logger& log) {
  const Dataset d = load_dataset(*c.dataset);
  Rng rng(derive_seed(c.seed.value_or(0), 10));
  Network net(load_arch(*c.arch), spec_for(d), rng);
  load_checkpoint(*c.checkpoint, net);
  json m = {{"task", task_name(d.task)}};
  for (auto [name, split] : {std::pair{"train", &d.train}, std::pair{"val", &d.val},
                             std::pair{"test", &d.test}})
    if (!split->empty()) m[name] = metrics_json(evaluate(net, *split));
  fs::create_directories(c.out);
  write_file(c.out / "eval.json", m.dump(2));
  log.event({{"event", "eval_done"}, {"metrics", m}});
  if (m.contains("test"))
    log.summary("test " + m["test"]["metric"].get<std::string>() + " " +
                std::to_string(m["test"]["value"].get<double>()));
  return m;
}

json cmd_audit(const RunConfig& c, Logger& log) {
  const AuditSpec& a = c.audit;
  json rep;
  rep["mode"] = a.mode;
  rep["num_ops"] = a.num_ops;
  rep["dual"] = a.dual;
  if (a.mode == "cell") {
    rep["cells"] = a.cells;
    rep["verts_per_cell"] = a.verts_per_cell;
    const BigInt n = count_candidates(CountMode::kCell, 0, a.num_ops, a.cells, a.verts_per_cell,
                                      a.dual);
    rep["candidates"] = n.str();
    rep["candidates_approx"] = approx(n);
  } else {
    rep["n_vertices"] = a.n_vertices;
    const BigInt n =
        count_candidates(CountMode::kProliferation, a.n_vertices, a.num_ops, 1, 1, a.dual);
    rep["candidates"] = n.str();
    rep["candidates_approx"] = approx(n);
    // Structural proliferation to the requested size; operations are
    // placeholders, only the link counts matter.
    ProliferationPlan plan;
    plan.target_size = a.n_vertices;
    plan.epochs.assign(static_cast<std::size_t>(plan.divisions()) + 1, 1);
    auto res = proliferation_loop(plan, [](const ArchDag& arch, int phase) {
      return random_strategy(arch, static_cast<std::uint64_t>(phase));
    });
    json its = json::array();
    long total = 0;
    for (const auto& it : res.audits) {
      const long prim = it.fixed + static_cast<long>(it.mixtures) * a.num_ops;
      total += prim;
      its.push_back({{"i", it.i}, {"fixed", it.fixed}, {"mixtures", it.mixtures},
                     {"primitives", prim}});
    }
    const long bound = (2L + 3L * a.num_ops) * static_cast<long>(res.arch.n_vertices());
    rep["iterations"] = its;
    rep["total_primitives"] = total;
    rep["linear_bound"] = bound;
    rep["within_bound"] = total <= bound;
  }
  if (c.arch) {
    const ArchDag arch = load_arch(*c.arch);
    json aj = {{"n_vertices", arch.n_vertices()}};
    for (Space s : {Space::kNode, Space::kRelation}) {
      if (s == Space::kRelation && !arch.relation_space) continue;
      IterationAudit it = count_ops(arch, s, a.num_ops);
      aj[std::string(space_name(s))] = {
          {"fixed", it.fixed}, {"mixtures", it.mixtures}, {"primitives", it.primitives}};
    }
    rep["arch"] = aj;
  }
  fs::create_directories(c.out);
  write_file(c.out / "audit_report.json", rep.dump(2));
  json ev = rep;
  ev["event"] = "audit_report";
  log.event(ev);
  log.summary(a.mode + " mode: " + rep["candidates"].get<std::string>() + " candidates (" +
              rep["candidates_approx"].get<std::string>() + ")");
  return rep;
}

json cmd_export(const RunConfig& c, Logger& log) {
  const ArchDag arch = load_arch(*c.arch);
  fs::create_directories(c.out);
  const fs::path path = c.out / (c.export_format == "dot" ? "arch.dot" : "arch.json");
  write_file(path, c.export_format == "dot" ? export_dot(arch) : arch_to_json(arch));
  json j = {{"event", "export"}, {"format", c.export_format}, {"path", path.string()}};
  log.event(j);
  log.summary("wrote " + path.string());
  return j;
}

int run(const std::string& command, const Overrides& o, const std::vector<std::uint64_t>& seeds,
        std::ostream& out, std::ostream& err) {
  Logger log(out, err);
  auto fail = [&](const char* kind, const std::string& msg, int code) {
    log.event({{"event", "error"}, {"kind", kind}, {"command", command}, {"message", msg}});
    log.summary("error: " + msg);
    return code;
  };
  std::vector<RunConfig> runs;
  try {
    Overrides first = o;
    if (!seeds.empty()) first.seed = seeds.front();
    RunConfig base = resolve(command, first);
    if (seeds.empty()) {
      runs.push_back(base);
    } else {
      for (std::uint64_t s : seeds) {
        RunConfig r = base;
        r.seed = s;
        r.out = base.out / ("seed_" + std::to_string(s));
        runs.push_back(std::move(r));
      }
    }
  } catch (const ConfigError& e) {
    return fail("config", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("config", e.what(), 2);
  }

  auto one = [&](const RunConfig& c, Logger& l) {
    if (command == "gen-data") cmd_gen_data(c, l);
    else if (command == "search") cmd_search(c, l);
    else if (command == "train") cmd_train(c, l);
    else if (command == "eval") cmd_eval(c, l);
    else if (command == "audit") cmd_audit(c, l);
    else cmd_export(c, l);
  };
  if (seeds.empty()) {
    try {
      one(runs[0], log);
    } catch (const std::exception& e) {
      return fail("runtime", e.what(), 1);
    }
    return 0;
  }
  // One thread per seed; each run keeps its kernels single-threaded.
  std::vector<int> codes(runs.size(), 0);
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < runs.size(); ++i)
    pool.emplace_back([&, i] {
      omp_set_num_threads(1);
      Logger l = log.tagged(*runs[i].seed);
      try {
        one(runs[i], l);
      } catch (const std::exception& e) {
        l.event({{"event", "error"}, {"kind", "runtime"}, {"command", command},
                 {"message", e.what()}});
        l.summary(std::string("error: ") + e.what());
        codes[i] = 1;
      }
    });
  for (auto& t : pool) t.join();
  return *std::max_element(codes.begin(), codes.end());
}

}  // namespace relnas::cli
