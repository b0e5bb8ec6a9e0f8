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

#ifndef RELNAS_NETWORK_HPP_
#define RELNAS_NETWORK_HPP_

#include <string>
#include <utility>
#include <vector>

#include "relnas/arch.hpp"
#include "relnas/heads.hpp"

namespace relnas {

struct NetworkSpec {
  Task task = Task::kNodeCls;
  int raw_d_v = 1;  // dataset feature widths
  int raw_d_e = 1;
  int n_out = 2;    // classes, or 1 for regression
};

NetworkSpec spec_for(const Dataset& d);

// A complete model: linear input embeddings into the architecture widths,
// the architecture DAG and the task head.
class Network {
 public:
  Network(ArchDag arch, const NetworkSpec& spec, Rng& rng);

  ArchDag& arch() { return arch_; }
  const ArchDag& arch() const { return arch_; }
  HeadParams& head() { return head_; }
  const HeadParams& head() const { return head_; }
  const NetworkSpec& spec() const { return spec_; }

  // Task output for one graph: logits [n x C], [m x C], or [1 x n_out].
  // `dropout_rng` enables dropout on V_g and E_g.
  Tensor forward(const Graph& g, bool training, Rng* dropout_rng = nullptr,
                 double dropout_rate = 0.0);
  // Cross-entropy for classification, L1 for regression.
  Tensor loss(const Graph& g, bool training, Rng* dropout_rng = nullptr,
              double dropout_rate = 0.0);

  // Operation, embedding and head weights (the W of the bilevel problem).
  std::vector<Tensor> weights() const;
  // Mixture alphas (the A of the bilevel problem).
  std::vector<Tensor> alphas() const { return alpha_tensors(arch_); }
  // Every trainable tensor with a stable name, in checkpoint order.
  std::vector<std::pair<std::string, Tensor>> named_weights() const;
  // Recreates the head after the vertex count changes.
  void reset_head(Rng& rng);

 private:
  ArchDag arch_;
  NetworkSpec spec_;
  Tensor emb_v_w_, emb_v_b_, emb_e_w_, emb_e_b_;
  HeadParams head_;
};

// Loss of a task output against the graph's labels.
Tensor task_loss(Task task, const Tensor& out, const Graph& g);

}  // namespace relnas

#endif  // RELNAS_NETWORK_HPP_
