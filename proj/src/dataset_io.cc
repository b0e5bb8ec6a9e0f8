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

// Dataset JSON reader/writer. Floats go through nlohmann's shortest
// round-trip formatting, so a write/read cycle is bit-exact.

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "relnas/graph.hpp"

namespace relnas {

using nlohmann::json;

namespace {

json matrix_json(const Tensor& t) {
  json rows = json::array();
  const auto d = t.data();
  const std::size_t c = t.cols();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < c; ++j) {
      const double v = d[i * c + j];
      if (!std::isfinite(v)) throw Error("dataset: cannot serialize non-finite feature");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

json graph_json(const Graph& g) {
  json j;
  j["n"] = g.n;
  json edges = json::array();
  for (const auto& [s, t] : g.edges()) edges.push_back({s, t});
  j["edges"] = std::move(edges);
  j["v_in"] = matrix_json(g.v_in);
  j["e_in"] = g.e_in.defined() ? matrix_json(g.e_in) : json(nullptr);
  if (!g.node_labels.empty()) j["node_labels"] = g.node_labels;
  if (!g.edge_labels.empty()) j["edge_labels"] = g.edge_labels;
  if (g.graph_target) j["graph_target"] = *g.graph_target;
  return j;
}

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw Error("dataset: " + where + ": " + what);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema(where, std::string("missing field '") + key + "'");
  return *it;
}

int int_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) schema(where + "." + key, "expected an integer");
  return v.get<int>();
}

Tensor matrix_from(const json& rows, const std::string& where) {
  if (!rows.is_array() || rows.empty()) schema(where, "expected a non-empty array of rows");
  const std::size_t m = rows.size();
  if (!rows[0].is_array() || rows[0].empty()) schema(where + "[0]", "expected a non-empty row");
  const std::size_t c = rows[0].size();
  std::vector<double> data;
  data.reserve(m * c);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& r = rows[i];
    const std::string w = where + "[" + std::to_string(i) + "]";
    if (!r.is_array() || r.size() != c) schema(w, "ragged row");
    for (const auto& v : r) {
      if (!v.is_number()) schema(w, "expected numbers");
      data.push_back(v.get<double>());
    }
  }
  return Tensor({m, c}, std::move(data));
}

std::vector<int> int_list(const json& v, std::size_t expect, const std::string& where) {
  if (!v.is_array() || v.size() != expect)
    schema(where, "expected " + std::to_string(expect) + " integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) schema(where, "expected integers");
    out.push_back(x.get<int>());
  }
  return out;
}

Graph graph_from(const json& j, const std::string& where) {
  const int n = int_field(j, "n", where);
  const json& ej = field(j, "edges", where);
  if (!ej.is_array()) schema(where + ".edges", "expected an array");
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < ej.size(); ++i) {
    const auto& e = ej[i];
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
      schema(where + ".edges[" + std::to_string(i) + "]", "expected [src, dst]");
    edges.emplace_back(e[0].get<int>(), e[1].get<int>());
  }
  Tensor v_in = matrix_from(field(j, "v_in", where), where + ".v_in");
  std::optional<Tensor> e_in;
  const json& ein = field(j, "e_in", where);
  if (!ein.is_null()) e_in = matrix_from(ein, where + ".e_in");
  std::vector<int> edge_labels;
  if (j.contains("edge_labels"))
    edge_labels = int_list(j["edge_labels"], edges.size(), where + ".edge_labels");
  Graph g;
  try {
    g = graph_from_edges(n, edges, std::move(v_in), std::move(e_in), std::move(edge_labels));
  } catch (const Error& e) {
    schema(where, e.what());
  }
  if (j.contains("node_labels"))
    g.node_labels = int_list(j["node_labels"], static_cast<std::size_t>(n), where + ".node_labels");
  if (j.contains("graph_target")) {
    if (!j["graph_target"].is_number()) schema(where + ".graph_target", "expected a number");
    g.graph_target = j["graph_target"].get<double>();
  }
  return g;
}

}  // namespace

std::string dataset_to_json(const Dataset& d) {
  json j;
  j["task"] = task_name(d.task);
  j["d_v"] = d.d_v;
  j["d_e"] = d.d_e;
  j["num_classes"] = d.num_classes;
  json splits;
  auto put = [](const std::vector<Graph>& gs) {
    json a = json::array();
    for (const auto& g : gs) a.push_back(graph_json(g));
    return a;
  };
  splits["train"] = put(d.train);
  splits["val"] = put(d.val);
  splits["test"] = put(d.test);
  j["splits"] = std::move(splits);
  return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("dataset: malformed JSON at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  Dataset d;
  const json& task = field(j, "task", "root");
  if (!task.is_string()) schema("root.task", "expected a string");
  d.task = parse_task(task.get<std::string>());
  d.d_v = int_field(j, "d_v", "root");
  d.d_e = int_field(j, "d_e", "root");
  d.num_classes = int_field(j, "num_classes", "root");
  const json& splits = field(j, "splits", "root");
  auto read = [&](const char* name, std::vector<Graph>& out) {
    const json& a = field(splits, name, "splits");
    if (!a.is_array()) schema(std::string("splits.") + name, "expected an array");
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(graph_from(a[i], std::string("splits.") + name + "[" + std::to_string(i) + "]"));
  };
  read("train", d.train);
  read("val", d.val);
  read("test", d.test);
  d.check();
  return d;
}

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("dataset: cannot write " + path.string());
  out << dataset_to_json(d) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("dataset: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return dataset_from_json(ss.str());
}

}  // namespace relnas
