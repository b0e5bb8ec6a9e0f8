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

#include "relnas/graph.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "relnas/random.hpp"

namespace relnas {

std::vector<Edge> Graph::edges() const {
  std::vector<Edge> out;
  out.reserve(m);
  for (int e = 0; e < m; ++e) out.emplace_back((*edge_src)[e], (*edge_dst)[e]);
  return out;
}

Graph graph_from_edges(int n, const std::vector<Edge>& edges, Tensor v_in,
                       std::optional<Tensor> e_in, std::vector<int> edge_labels) {
  if (n < 1) throw Error("graph_from_edges: need at least one node");
  if (!v_in.defined() || v_in.dim() != 2 || v_in.rows() != static_cast<std::size_t>(n))
    throw Error("graph_from_edges: v_in must be [n x d_V] with n = " + std::to_string(n));
  const int m = static_cast<int>(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const auto [s, t] = edges[i];
    if (s < 0 || s >= n || t < 0 || t >= n)
      throw Error("graph_from_edges: edge " + std::to_string(i) + " (" + std::to_string(s) +
                  "," + std::to_string(t) + ") has an endpoint outside [0, " +
                  std::to_string(n) + ")");
  }
  if (e_in && (e_in->dim() != 2 || e_in->rows() != edges.size()))
    throw Error("graph_from_edges: e_in has " + shape_str(e_in->shape()) + " but there are " +
                std::to_string(m) + " edges");
  if (!edge_labels.empty() && edge_labels.size() != edges.size())
    throw Error("graph_from_edges: edge label count does not match edge count");

  Graph g;
  g.n = n;
  g.m = m;
  g.v_in = std::move(v_in);

  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::stable_sort(perm.begin(), perm.end(),
                   [&](int a, int b) { return edges[a].second < edges[b].second; });

  g.csr_offsets.assign(n + 1, 0);
  for (const auto& e : edges) ++g.csr_offsets[e.second + 1];
  for (int i = 0; i < n; ++i) g.csr_offsets[i + 1] += g.csr_offsets[i];

  std::vector<int> src(m), dst(m);
  g.csr_sources.resize(m);
  for (int r = 0; r < m; ++r) {
    src[r] = edges[perm[r]].first;
    dst[r] = edges[perm[r]].second;
    g.csr_sources[r] = src[r];
  }
  g.by_target = Segments::from_ids(dst, static_cast<std::size_t>(n));
  g.edge_src = std::make_shared<const std::vector<int>>(std::move(src));
  g.edge_dst = std::make_shared<const std::vector<int>>(std::move(dst));

  if (m > 0) {
    if (e_in) {
      const std::size_t d = e_in->cols();
      std::vector<double> rows(static_cast<std::size_t>(m) * d);
      const auto ed = e_in->data();
      for (int r = 0; r < m; ++r)
        std::copy_n(ed.data() + static_cast<std::size_t>(perm[r]) * d, d, rows.data() + r * d);
      g.e_in = Tensor({static_cast<std::size_t>(m), d}, std::move(rows));
    } else {
      g.e_in = Tensor::full({static_cast<std::size_t>(m), 1}, 1.0);
    }
  }
  if (!edge_labels.empty()) {
    g.edge_labels.resize(m);
    for (int r = 0; r < m; ++r) g.edge_labels[r] = edge_labels[perm[r]];
  }
  return g;
}

std::vector<std::pair<int, int>> neighbors(const Graph& g, int t) {
  if (t < 0 || t >= g.n)
    throw Error("neighbors: node " + std::to_string(t) + " outside [0, " +
                std::to_string(g.n) + ")");
  std::vector<std::pair<int, int>> out;
  for (int e = g.csr_offsets[t]; e < g.csr_offsets[t + 1]; ++e)
    out.emplace_back(g.csr_sources[e], e);
  return out;
}

std::string task_name(Task t) {
  switch (t) {
    case Task::kNodeCls: return "node_cls";
    case Task::kEdgeCls: return "edge_cls";
    case Task::kGraphReg: return "graph_reg";
    case Task::kGraphCls: return "graph_cls";
  }
  return "unknown";
}

Task parse_task(const std::string& s) {
  if (s == "node_cls") return Task::kNodeCls;
  if (s == "edge_cls") return Task::kEdgeCls;
  if (s == "graph_reg") return Task::kGraphReg;
  if (s == "graph_cls") return Task::kGraphCls;
  throw Error("unknown task '" + s + "'");
}

void Dataset::check() const {
  auto one = [&](const Graph& g, const std::string& where) {
    if (static_cast<int>(g.d_v()) != d_v)
      throw Error(where + ": node feature width " + std::to_string(g.d_v()) +
                  " != dataset d_v " + std::to_string(d_v));
    if (g.m > 0 && static_cast<int>(g.d_e()) != d_e)
      throw Error(where + ": edge feature width " + std::to_string(g.d_e()) +
                  " != dataset d_e " + std::to_string(d_e));
    switch (task) {
      case Task::kNodeCls:
        if (g.node_labels.size() != static_cast<std::size_t>(g.n))
          throw Error(where + ": missing node labels");
        for (int l : g.node_labels)
          if (l < 0 || l >= num_classes) throw Error(where + ": node label out of range");
        break;
      case Task::kEdgeCls:
        if (g.edge_labels.size() != static_cast<std::size_t>(g.m))
          throw Error(where + ": missing edge labels");
        for (int l : g.edge_labels)
          if (l < 0 || l >= num_classes) throw Error(where + ": edge label out of range");
        break;
      case Task::kGraphReg:
      case Task::kGraphCls:
        if (!g.graph_target) throw Error(where + ": missing graph target");
        if (task == Task::kGraphCls &&
            (*g.graph_target < 0 || *g.graph_target >= num_classes))
          throw Error(where + ": graph class out of range");
        break;
    }
  };
  for (std::size_t i = 0; i < train.size(); ++i) one(train[i], "train[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < val.size(); ++i) one(val[i], "val[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < test.size(); ++i) one(test[i], "test[" + std::to_string(i) + "]");
}

namespace {

void check_sbm(const SbmParams& p) {
  if (p.n < 1 || p.k < 1 || p.n % p.k != 0)
    throw Error("sbm: k = " + std::to_string(p.k) + " must divide n = " + std::to_string(p.n));
  auto prob = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(std::string("sbm: ") + name + " must be a probability, got " +
                  std::to_string(v));
  };
  prob(p.p_intra, "p_intra");
  prob(p.p_inter, "p_inter");
  prob(p.hint_fraction, "hint_fraction");
}

// Directed SBM edges in (src, dst) row order.
std::vector<Edge> sbm_edges(const SbmParams& p, Rng& rng, std::vector<int>& community) {
  const int block = p.n / p.k;
  community.resize(p.n);
  for (int i = 0; i < p.n; ++i) community[i] = i / block;
  std::vector<Edge> edges;
  for (int s = 0; s < p.n; ++s)
    for (int t = 0; t < p.n; ++t) {
      if (s == t) continue;
      const double prob = community[s] == community[t] ? p.p_intra : p.p_inter;
      if (uniform01(rng) < prob) edges.emplace_back(s, t);
    }
  return edges;
}

}  // namespace

Graph gen_sbm(const SbmParams& p, std::uint64_t seed) {
  check_sbm(p);
  const int d = p.d_v == 0 ? p.k : p.d_v;
  if (d < p.k) throw Error("sbm: d_v must be at least k");
  Rng rng(seed);
  std::vector<int> community;
  auto edges = sbm_edges(p, rng, community);

  std::vector<int> nodes(p.n);
  std::iota(nodes.begin(), nodes.end(), 0);
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const auto hints = static_cast<std::size_t>(std::llround(p.hint_fraction * p.n));
  std::vector<double> feat(static_cast<std::size_t>(p.n) * d, 0.0);
  for (std::size_t i = 0; i < hints; ++i)
    feat[static_cast<std::size_t>(nodes[i]) * d + community[nodes[i]]] = 1.0;

  Graph g = graph_from_edges(p.n, edges,
                             Tensor({static_cast<std::size_t>(p.n), static_cast<std::size_t>(d)},
                                    std::move(feat)));
  g.node_labels = community;
  return g;
}

Graph gen_edge_task(const SbmParams& p, std::uint64_t seed) {
  check_sbm(p);
  const int d = p.d_v == 0 ? 8 : p.d_v;
  Rng rng(seed);
  std::vector<int> community;
  auto edges = sbm_edges(p, rng, community);
  std::vector<int> labels;
  labels.reserve(edges.size());
  for (const auto& [s, t] : edges) labels.push_back(community[s] == community[t] ? 1 : 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> feat(static_cast<std::size_t>(p.n) * d);
  for (auto& v : feat) v = normal(rng);
  return graph_from_edges(p.n, edges,
                          Tensor({static_cast<std::size_t>(p.n), static_cast<std::size_t>(d)},
                                 std::move(feat)),
                          std::nullopt, std::move(labels));
}

std::int64_t count_triangles(const Graph& g) {
  std::vector<std::set<int>> adj(g.n);
  for (int e = 0; e < g.m; ++e) {
    const int s = (*g.edge_src)[e], t = (*g.edge_dst)[e];
    if (s == t) continue;
    adj[s].insert(t);
    adj[t].insert(s);
  }
  std::int64_t count = 0;
  for (int u = 0; u < g.n; ++u)
    for (int v : adj[u]) {
      if (v <= u) continue;
      for (int w : adj[v])
        if (w > v && adj[u].count(w)) ++count;
    }
  return count;
}

Graph gen_reg_graph(int n_min, int n_max, std::uint64_t seed) {
  if (n_min < 3 || n_max < n_min)
    throw Error("graph_reg: need 3 <= n_min <= n_max, got " + std::to_string(n_min) + ", " +
                std::to_string(n_max));
  Rng rng(seed);
  const int n = std::uniform_int_distribution<int>(n_min, n_max)(rng);
  std::set<Edge> und;
  for (int i = 1; i < n; ++i) {
    const int j = std::uniform_int_distribution<int>(0, i - 1)(rng);
    und.emplace(j, i);
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (uniform01(rng) < 0.3) und.emplace(i, j);
  std::vector<Edge> edges;
  std::vector<int> degree(n, 0);
  for (const auto& [a, b] : und) {
    edges.emplace_back(a, b);
    edges.emplace_back(b, a);
    ++degree[a];
    ++degree[b];
  }
  constexpr int kDegreeSlots = 9;
  std::vector<double> feat(static_cast<std::size_t>(n) * kDegreeSlots, 0.0);
  for (int i = 0; i < n; ++i) feat[static_cast<std::size_t>(i) * kDegreeSlots + std::min(degree[i], 8)] = 1.0;
  Graph g = graph_from_edges(
      n, edges, Tensor({static_cast<std::size_t>(n), kDegreeSlots}, std::move(feat)));
  g.graph_target = static_cast<double>(count_triangles(g)) / n;
  return g;
}

Dataset make_dataset(Task task, int num_classes, int train, int val, int test,
                     std::uint64_t seed, const std::function<Graph(std::uint64_t)>& gen) {
  Dataset d;
  d.task = task;
  d.num_classes = num_classes;
  std::uint64_t stream = 0;
  for (int i = 0; i < train; ++i) d.train.push_back(gen(derive_seed(seed, stream++)));
  for (int i = 0; i < val; ++i) d.val.push_back(gen(derive_seed(seed, stream++)));
  for (int i = 0; i < test; ++i) d.test.push_back(gen(derive_seed(seed, stream++)));
  const Graph* first = !d.train.empty() ? &d.train[0] : (!d.val.empty() ? &d.val[0] : nullptr);
  if (first == nullptr && !d.test.empty()) first = &d.test[0];
  if (first != nullptr) {
    d.d_v = static_cast<int>(first->d_v());
    d.d_e = static_cast<int>(first->d_e());
  }
  d.check();
  return d;
}

Dataset gen_graph_reg(int n_graphs, int n_min, int n_max, std::uint64_t seed) {
  if (n_graphs < 1) throw Error("graph_reg: need at least one graph");
  const int train = std::max(1, n_graphs * 8 / 10);
  const int val = (n_graphs - train) / 2;
  const int test = n_graphs - train - val;
  return make_dataset(Task::kGraphReg, 1, train, val, test, seed,
                      [&](std::uint64_t s) { return gen_reg_graph(n_min, n_max, s); });
}

Graph knn_graph(const Tensor& points, int k) {
  if (points.dim() != 2 || points.cols() != 3)
    throw Error("knn_graph: points must be [n x 3], got " + shape_str(points.shape()));
  const int n = static_cast<int>(points.rows());
  if (k < 1 || k >= n)
    throw Error("knn_graph: need 1 <= k < n, got k = " + std::to_string(k) + ", n = " +
                std::to_string(n));
  const auto p = points.data();
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n) * k);
  std::vector<std::pair<double, int>> cand;
  for (int t = 0; t < n; ++t) {
    cand.clear();
    for (int s = 0; s < n; ++s) {
      if (s == t) continue;
      double d2 = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double diff = p[s * 3 + c] - p[t * 3 + c];
        d2 += diff * diff;
      }
      cand.emplace_back(d2, s);
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int i = 0; i < k; ++i) edges.emplace_back(cand[i].second, t);
  }
  return graph_from_edges(n, edges, points.detach());
}

}  // namespace relnas
