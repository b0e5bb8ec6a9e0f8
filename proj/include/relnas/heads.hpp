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

#ifndef RELNAS_HEADS_HPP_
#define RELNAS_HEADS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "relnas/arch.hpp"

namespace relnas {

// Task layers on top of the searched vertices:
//   V_g = relu(BN([V_1 | ... | V_N] W_V)),  E_g likewise,
//   node logits V_g C_V, edge logits E_g C_E, graph output [mean V_g | mean E_g] C_G.
struct HeadParams {
  Tensor w_v;  // [(N d_v) x d_v]
  Tensor w_e;  // [(N d_e) x d_e]
  BatchNorm bn_v{1};
  BatchNorm bn_e{1};
  Tensor c_v;  // [d_v x n_out]
  // [d_e x n_out]; [2 d_v x n_out] when edges are predicted from node pairs.
  Tensor c_e;
  Tensor c_g;  // [(d_v + d_e) x n_out]
  bool edge_from_nodes = false;

  static HeadParams init(int n_vertices, int d_v, int d_e, int n_out, bool edge_from_nodes,
                         Rng& rng);
  // Trainable tensors with stable names.
  std::vector<std::pair<std::string, Tensor>> named_tensors() const;
};

// Concatenates the intermediate vertices in `order`, maps, normalizes and
// rectifies. E_g is undefined when the graph has no edges.
std::pair<Tensor, Tensor> global_features(const ForwardState& st, const std::vector<int>& order,
                                          HeadParams& p, bool training);

// [d_v + d_e]; the edge half is zero when e_g is undefined.
Tensor graph_readout(const Tensor& v_g, const Tensor& e_g, std::size_t d_e);

Tensor predict_node(const Tensor& v_g, const HeadParams& p);
Tensor predict_edge(const Tensor& e_g, const HeadParams& p);
// Edge logits from [V_g[s] | V_g[t]], for architectures without a relation space.
Tensor predict_edge_from_nodes(const Tensor& v_g, const Graph& g, const HeadParams& p);
// [1 x n_out].
Tensor predict_graph(const Tensor& g_g, const HeadParams& p);

// Inverted dropout; identity when rate is 0.
Tensor dropout(const Tensor& x, double rate, Rng& rng);

}  // namespace relnas

#endif  // RELNAS_HEADS_HPP_
