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

#include "relnas/network.hpp"

namespace relnas {

NetworkSpec spec_for(const Dataset& d) {
  NetworkSpec s;
  s.task = d.task;
  s.raw_d_v = d.d_v;
  s.raw_d_e = d.d_e;
  s.n_out = d.task == Task::kGraphReg ? 1 : d.num_classes;
  return s;
}

Network::Network(ArchDag arch, const NetworkSpec& spec, Rng& rng)
    : arch_(std::move(arch)), spec_(spec) {
  validate(arch_);
  ensure_params(arch_, rng);
  if (spec_.raw_d_v < 1 || spec_.raw_d_e < 1 || spec_.n_out < 1)
    throw Error("Network: feature widths and output size must be positive");
  const auto dv = static_cast<std::size_t>(arch_.d_v);
  const auto de = static_cast<std::size_t>(arch_.d_e);
  emb_v_w_ = glorot_uniform(static_cast<std::size_t>(spec_.raw_d_v), dv, rng);
  emb_v_b_ = Tensor::zeros({dv}, true);
  emb_e_w_ = glorot_uniform(static_cast<std::size_t>(spec_.raw_d_e), de, rng);
  emb_e_b_ = Tensor::zeros({de}, true);
  reset_head(rng);
}

void Network::reset_head(Rng& rng) {
  const bool from_nodes = spec_.task == Task::kEdgeCls && !arch_.relation_space;
  head_ = HeadParams::init(static_cast<int>(arch_.n_vertices()), arch_.d_v, arch_.d_e,
                           spec_.n_out, from_nodes, rng);
}

Tensor Network::forward(const Graph& g, bool training, Rng* dropout_rng, double dropout_rate) {
  if (g.d_v() != static_cast<std::size_t>(spec_.raw_d_v))
    throw Error("Network: graph node width " + std::to_string(g.d_v()) + " differs from " +
                std::to_string(spec_.raw_d_v));
  Tensor v0 = add_rowvec(matmul(g.v_in, emb_v_w_), emb_v_b_);
  Tensor e0;
  if (g.m > 0) {
    if (g.d_e() != static_cast<std::size_t>(spec_.raw_d_e))
      throw Error("Network: graph edge width " + std::to_string(g.d_e()) + " differs from " +
                  std::to_string(spec_.raw_d_e));
    e0 = add_rowvec(matmul(g.e_in, emb_e_w_), emb_e_b_);
  }
  ForwardState st = dag_forward(arch_, g, v0, e0);
  auto [v_g, e_g] = global_features(st, arch_.order, head_, training);
  if (dropout_rng != nullptr && dropout_rate > 0.0) {
    v_g = dropout(v_g, dropout_rate, *dropout_rng);
    if (e_g.defined()) e_g = dropout(e_g, dropout_rate, *dropout_rng);
  }
  switch (spec_.task) {
    case Task::kNodeCls:
      return predict_node(v_g, head_);
    case Task::kEdgeCls:
      return head_.edge_from_nodes ? predict_edge_from_nodes(v_g, g, head_)
                                   : predict_edge(e_g, head_);
    case Task::kGraphReg:
    case Task::kGraphCls:
      return predict_graph(graph_readout(v_g, e_g, static_cast<std::size_t>(arch_.d_e)), head_);
  }
  throw Error("Network: unknown task");
}

Tensor task_loss(Task task, const Tensor& out, const Graph& g) {
  switch (task) {
    case Task::kNodeCls:
      return cross_entropy(out, g.node_labels);
    case Task::kEdgeCls:
      return cross_entropy(out, g.edge_labels);
    case Task::kGraphReg:
      if (!g.graph_target) throw Error("task_loss: graph has no regression target");
      return mean_all(abs(sub(out, Tensor::full(out.shape(), *g.graph_target))));
    case Task::kGraphCls: {
      if (!g.graph_target) throw Error("task_loss: graph has no class label");
      const int label[] = {static_cast<int>(*g.graph_target)};
      return cross_entropy(out, label);
    }
  }
  throw Error("task_loss: unknown task");
}

Tensor Network::loss(const Graph& g, bool training, Rng* dropout_rng, double dropout_rate) {
  return task_loss(spec_.task, forward(g, training, dropout_rng, dropout_rate), g);
}

std::vector<std::pair<std::string, Tensor>> Network::named_weights() const {
  std::vector<std::pair<std::string, Tensor>> out = {{"embed.v.weight", emb_v_w_},
                                                     {"embed.v.bias", emb_v_b_},
                                                     {"embed.e.weight", emb_e_w_},
                                                     {"embed.e.bias", emb_e_b_}};
  static const char* kFilm[] = {"w1", "w2", "wk", "wb"};
  for (Space s : {Space::kNode, Space::kRelation})
    for (const Link& l : arch_.links(s))
      for (int k = 0; k < kNumOps; ++k) {
        if (!l.params[k]) continue;
        const auto ts = l.params[k]->tensors();
        for (std::size_t i = 0; i < ts.size(); ++i)
          out.emplace_back(link_id(s, l) + "." + op_name(s, k) + "." + kFilm[i], ts[i]);
      }
  for (auto& nt : head_.named_tensors()) out.push_back(std::move(nt));
  return out;
}

std::vector<Tensor> Network::weights() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_weights()) out.push_back(t);
  return out;
}

}  // namespace relnas
