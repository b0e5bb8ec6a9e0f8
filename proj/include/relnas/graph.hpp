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

#ifndef RELNAS_GRAPH_HPP_
#define RELNAS_GRAPH_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relnas/tensor.hpp"

namespace relnas {

using Edge = std::pair<int, int>;  // (src, dst)

// Directed graph stored as CSR over incoming edges. Edge rows (e_in,
// edge_labels, edge_src/edge_dst) are in target-major order: all edges into
// node 0 first, then node 1, and so on; ties keep input order.
struct Graph {
  int n = 0;
  int m = 0;
  std::vector<int> csr_offsets;  // n + 1 entries
  std::vector<int> csr_sources;  // m entries: source of each incoming edge
  Index edge_src;                // m entries
  Index edge_dst;                // m entries, non-decreasing
  std::shared_ptr<const Segments> by_target;
  Tensor v_in;  // [n x d_V]
  Tensor e_in;  // [m x d_E]; undefined when m == 0

  std::vector<int> node_labels;
  std::vector<int> edge_labels;
  std::optional<double> graph_target;

  std::size_t d_v() const { return v_in.cols(); }
  std::size_t d_e() const { return e_in.defined() ? e_in.cols() : 1; }
  int in_degree(int t) const { return csr_offsets[t + 1] - csr_offsets[t]; }
  // Edge list in CSR order.
  std::vector<Edge> edges() const;
};

// Builds the CSR. Without e_in every edge gets the feature row [1].
// `edge_labels`, when given, is aligned with `edges` and reordered with them.
Graph graph_from_edges(int n, const std::vector<Edge>& edges, Tensor v_in,
                       std::optional<Tensor> e_in = std::nullopt,
                       std::vector<int> edge_labels = {});

// Incoming neighbours of t as (source node, edge row).
std::vector<std::pair<int, int>> neighbors(const Graph& g, int t);

enum class Task { kNodeCls, kEdgeCls, kGraphReg, kGraphCls };

std::string task_name(Task t);
Task parse_task(const std::string& s);

struct Dataset {
  Task task = Task::kNodeCls;
  int d_v = 0;
  int d_e = 0;
  // Number of classes, or 1 for regression.
  int num_classes = 0;
  std::vector<Graph> train;
  std::vector<Graph> val;
  std::vector<Graph> test;

  // Throws unless all graphs agree on widths and carry the task's labels.
  void check() const;
};

struct SbmParams {
  int n = 120;
  int k = 3;
  double p_intra = 0.6;
  double p_inter = 0.05;
  double hint_fraction = 0.1;
  // Feature width; 0 selects the generator's default (k for gen_sbm, 8 for
  // gen_edge_task).
  int d_v = 0;
};

// Node classification on a stochastic block model. Communities are
// contiguous equal blocks; a random hint_fraction of the nodes carries a
// one-hot community hint in its first k columns, the rest all-zero features.
Graph gen_sbm(const SbmParams& p, std::uint64_t seed);

// Edge classification: label 1 iff the endpoints share a community. Node
// features are i.i.d. standard normal (no community signal).
Graph gen_edge_task(const SbmParams& p, std::uint64_t seed);

// Undirected triangles, treating a pair as adjacent if an edge exists in
// either direction.
std::int64_t count_triangles(const Graph& g);

// Random symmetric graph (spanning tree plus Erdos-Renyi extras, p = 0.3)
// with n uniform in [n_min, n_max]. Target = triangles / n; node features are
// degree one-hots clipped at 8 (d_V = 9).
Graph gen_reg_graph(int n_min, int n_max, std::uint64_t seed);
// n_graphs of the above, split 80/10/10 into train/val/test.
Dataset gen_graph_reg(int n_graphs, int n_min, int n_max, std::uint64_t seed);

// k nearest neighbours (Euclidean, ties to the lower index) point into each
// node. points is [n x 3].
Graph knn_graph(const Tensor& points, int k);

// Assembles train/val/test from a per-graph generator with derived seeds.
Dataset make_dataset(Task task, int num_classes, int train, int val, int test,
                     std::uint64_t seed,
                     const std::function<Graph(std::uint64_t)>& gen);

void save_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset load_dataset(const std::filesystem::path& path);
std::string dataset_to_json(const Dataset& d);
Dataset dataset_from_json(const std::string& text);

}  // namespace relnas

#endif  // RELNAS_GRAPH_HPP_
