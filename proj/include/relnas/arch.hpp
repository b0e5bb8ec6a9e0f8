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

#ifndef RELNAS_ARCH_HPP_
#define RELNAS_ARCH_HPP_

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "relnas/graph.hpp"
#include "relnas/ops.hpp"
#include "relnas/random.hpp"

namespace relnas {

enum class Space { kNode, kRelation };

std::string_view space_name(Space s);
std::string op_name(Space s, int op);
int parse_op(Space s, const std::string& name);

// Input vertex ids. Intermediate vertices use positive ids.
inline constexpr int kIn0 = -2;
inline constexpr int kIn1 = -1;

// A directed link of one space. A fixed link carries one operation; a
// mixture link (op < 0) carries softmax weights alpha over all candidates.
struct Link {
  int src = 0;
  int dst = 0;
  int op = -1;
  Tensor alpha;  // [kNumOps], mixtures only
  std::array<std::optional<FilmParams>, kNumOps> params;

  bool is_mixture() const { return op < 0; }
};

// Architecture over a vertex order shared by the node and relation spaces.
// Vertex ids are stable labels; `order` is the evaluation order of the
// intermediate vertices.
struct ArchDag {
  std::vector<int> order;
  std::vector<Link> node_links;
  std::vector<Link> rel_links;
  bool cell_mode = false;
  bool relation_space = true;
  // Full supernet: every vertex may draw mixtures from all predecessors.
  bool one_shot = false;
  int d_v = 16;
  int d_e = 16;
  ZooConfig zoo;

  std::size_t n_vertices() const { return order.size(); }
  std::vector<Link>& links(Space s) { return s == Space::kNode ? node_links : rel_links; }
  const std::vector<Link>& links(Space s) const {
    return s == Space::kNode ? node_links : rel_links;
  }
  // 0 and 1 for the inputs, 2 + index in `order` for intermediates; -1 if
  // the id is unknown.
  int position(int vertex) const;
  bool has_mixtures() const;
};

std::string link_id(Space s, const Link& l);

// Fresh FiLM weights for every candidate that needs them and zero alphas.
void init_params(ArchDag& arch, Rng& rng);
// Fills only the missing weight bundles and alphas; existing ones are kept.
void ensure_params(ArchDag& arch, Rng& rng);

std::vector<Tensor> weight_tensors(const ArchDag& arch);
std::vector<Tensor> alpha_tensors(const ArchDag& arch);

struct ForwardState {
  std::map<int, Tensor> v;
  std::map<int, Tensor> e;
};

// Output of a single link given the source vertex features.
Tensor link_forward(const ArchDag& arch, Space s, const Link& l, const Tensor& v,
                    const Tensor& e, const Graph& g);

// Softmax(alpha)-weighted sum of every candidate of a mixture link.
Tensor mixture_forward(const ArchDag& arch, Space s, const Link& l, const ForwardState& st,
                       const Graph& g);

// Evaluates all vertices in order. Each intermediate vertex sums the
// transformed features of its incoming links in each space; a node link from
// vertex i reads (V_i, E_i), and so does a relation link. Without a relation
// space every E vertex equals the input edge features.
ForwardState dag_forward(const ArchDag& arch, const Graph& g, const Tensor& v_in,
                         const Tensor& e_in);
ForwardState dag_forward(const ArchDag& arch, const Graph& g);
// Cell form with distinct inputs for in0 and in1.
ForwardState dag_forward(const ArchDag& arch, const Graph& g, const Tensor& v_in0,
                         const Tensor& e_in0, const Tensor& v_in1, const Tensor& e_in1);

// Throws an Error naming every violated structural rule.
void validate(const ArchDag& arch);
// Empty when valid.
std::vector<std::string> violations(const ArchDag& arch);

std::string arch_to_json(const ArchDag& arch);
ArchDag arch_from_json(const std::string& text);
void save_arch(const std::filesystem::path& path, const ArchDag& arch);
ArchDag load_arch(const std::filesystem::path& path);
std::string export_dot(const ArchDag& arch);

using BigInt = boost::multiprecision::cpp_int;

enum class CountMode { kCell, kProliferation };

// Candidate architectures of one space. Cell mode: one shared cell of
// verts_per_cell vertices, each choosing 2 of its predecessors and an op per
// chosen link. Proliferation mode: n_vertices divided vertices, each keeping 2
// of its 3 local links with an op each. `dual` squares the count.
BigInt count_candidates(CountMode mode, int n_vertices, int num_ops, int cells,
                        int verts_per_cell, bool dual = false);

}  // namespace relnas

#endif  // RELNAS_ARCH_HPP_
