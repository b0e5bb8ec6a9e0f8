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

#include "relnas/heads.hpp"

namespace relnas {

namespace {

Tensor concat_vertices(const std::map<int, Tensor>& m, const std::vector<int>& order) {
  std::vector<Tensor> parts;
  parts.reserve(order.size());
  for (int v : order) {
    auto it = m.find(v);
    if (it == m.end() || !it->second.defined())
      throw Error("global_features: vertex " + std::to_string(v) + " was not evaluated");
    parts.push_back(it->second);
  }
  return parts.size() == 1 ? parts[0] : concat_cols(parts);
}

Tensor linear(const Tensor& x, const Tensor& w, const char* what) {
  if (x.cols() != w.shape()[0])
    throw Error(std::string(what) + ": input " + shape_str(x.shape()) + " does not chain with " +
                shape_str(w.shape()));
  return matmul(x, w);
}

}  // namespace

HeadParams HeadParams::init(int n_vertices, int d_v, int d_e, int n_out, bool edge_from_nodes,
                            Rng& rng) {
  if (n_vertices < 1 || d_v < 1 || d_e < 1 || n_out < 1)
    throw Error("HeadParams::init: sizes must be positive");
  const auto n = static_cast<std::size_t>(n_vertices);
  const auto dv = static_cast<std::size_t>(d_v);
  const auto de = static_cast<std::size_t>(d_e);
  const auto k = static_cast<std::size_t>(n_out);
  HeadParams p;
  p.w_v = glorot_uniform(n * dv, dv, rng);
  p.w_e = glorot_uniform(n * de, de, rng);
  p.bn_v = BatchNorm(dv);
  p.bn_e = BatchNorm(de);
  p.c_v = glorot_uniform(dv, k, rng);
  p.c_e = glorot_uniform(edge_from_nodes ? 2 * dv : de, k, rng);
  p.c_g = glorot_uniform(dv + de, k, rng);
  p.edge_from_nodes = edge_from_nodes;
  return p;
}

std::vector<std::pair<std::string, Tensor>> HeadParams::named_tensors() const {
  return {{"head.w_v", w_v},           {"head.w_e", w_e},           {"head.bn_v.weight", bn_v.weight()},
          {"head.bn_v.bias", bn_v.bias()}, {"head.bn_e.weight", bn_e.weight()},
          {"head.bn_e.bias", bn_e.bias()}, {"head.c_v", c_v},           {"head.c_e", c_e},
          {"head.c_g", c_g}};
}

std::pair<Tensor, Tensor> global_features(const ForwardState& st, const std::vector<int>& order,
                                          HeadParams& p, bool training) {
  Tensor v_cat = concat_vertices(st.v, order);
  Tensor v_g = relu(p.bn_v.forward(linear(v_cat, p.w_v, "global_features"), training));
  Tensor e_g;
  auto first = order.empty() ? st.e.end() : st.e.find(order.front());
  if (first != st.e.end() && first->second.defined()) {
    Tensor e_cat = concat_vertices(st.e, order);
    e_g = relu(p.bn_e.forward(linear(e_cat, p.w_e, "global_features"), training));
  }
  return {v_g, e_g};
}

Tensor graph_readout(const Tensor& v_g, const Tensor& e_g, std::size_t d_e) {
  Tensor v_mean = reshape(mean_rows(v_g), {1, v_g.cols()});
  Tensor e_mean = e_g.defined() ? reshape(mean_rows(e_g), {1, e_g.cols()})
                                : Tensor::zeros({1, d_e});
  const Tensor parts[] = {v_mean, e_mean};
  return reshape(concat_cols(parts), {v_g.cols() + e_mean.cols()});
}

Tensor predict_node(const Tensor& v_g, const HeadParams& p) {
  return linear(v_g, p.c_v, "predict_node");
}

Tensor predict_edge(const Tensor& e_g, const HeadParams& p) {
  if (p.edge_from_nodes) throw Error("predict_edge: head expects node-pair features");
  return linear(e_g, p.c_e, "predict_edge");
}

Tensor predict_edge_from_nodes(const Tensor& v_g, const Graph& g, const HeadParams& p) {
  if (!p.edge_from_nodes) throw Error("predict_edge_from_nodes: head expects edge features");
  if (g.m == 0) throw Error("predict_edge_from_nodes: graph has no edges");
  const Tensor parts[] = {gather_rows(v_g, g.edge_src), gather_rows(v_g, g.edge_dst)};
  return linear(concat_cols(parts), p.c_e, "predict_edge_from_nodes");
}

Tensor predict_graph(const Tensor& g_g, const HeadParams& p) {
  return linear(reshape(g_g, {1, g_g.numel()}), p.c_g, "predict_graph");
}

Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw Error("dropout: rate must be below 1");
  std::vector<double> mask(x.numel());
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = uniform01(rng) < rate ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace relnas
