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

#ifndef RELNAS_OPS_HPP_
#define RELNAS_OPS_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "relnas/graph.hpp"
#include "relnas/random.hpp"
#include "relnas/tensor.hpp"

namespace relnas {

inline constexpr int kNumOps = 8;

// Candidate indices are shared by both spaces: 0..5 are the parameterized
// operations, 6 is skip-connect and 7 is zero.
enum class NodeOp { kMean, kSum, kMax, kStd, kGem2, kGem3, kSkip, kZero };
enum class RelOp { kSub, kGauss, kHad, kMax, kSum, kMean, kSkip, kZero };

inline constexpr int kSkipOp = 6;
inline constexpr int kZeroOp = 7;

inline bool op_has_params(int op) { return op >= 0 && op < kSkipOp; }

std::string_view node_op_name(NodeOp op);
std::string_view rel_op_name(RelOp op);

// [fan_in x fan_out] leaf, uniform in +-sqrt(6 / (fan_in + fan_out)), requiring grad.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Constant (gamma, beta) rows that replace the MLP; lets tests pin the
// modulation to e.g. the identity.
struct FixedAffine {
  std::vector<double> gamma;
  std::vector<double> beta;
};

// Weights of the bias-free two-layer FiLM generator
//   [gamma beta] = relu(relu(cond W1) W2) [Wk Wb].
struct FilmParams {
  Tensor w1;  // [d_in x d_h]
  Tensor w2;  // [d_h x d_h]
  Tensor wk;  // [d_h x d_out]
  Tensor wb;  // [d_h x d_out]
  std::optional<FixedAffine> fixed;

  // Glorot-uniform weights, all requiring grad.
  static FilmParams init(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng);
  static FilmParams forced(std::vector<double> gamma, std::vector<double> beta);

  // Trainable tensors in a fixed order (empty for forced params).
  std::vector<Tensor> tensors() const;
  std::size_t d_out() const;
};

struct ZooConfig {
  double eps = 1e-5;
  double gauss_sigma = 1.0;
};

// gamma, beta: [rows(cond) x d_out].
std::pair<Tensor, Tensor> film_affine(const Tensor& cond, const FilmParams& p);

// One row per edge (s, t): gamma(E[s,t]) * V[s] + beta(E[s,t]).
Tensor modulate_messages(const Tensor& v, const Tensor& e, const Graph& g,
                         const FilmParams& p);

// Node-learning operation. `p` may be null for skip/zero. Nodes without
// incoming edges get zero rows from the aggregating kinds.
Tensor node_op_forward(NodeOp kind, const Tensor& v, const Tensor& e, const Graph& g,
                       const FilmParams* p, const ZooConfig& cfg);

// Relation-mining operation: gamma(h*) * E + beta(h*) per edge, where h* is
// the kind's pairwise function of the endpoint node features.
Tensor rel_op_forward(RelOp kind, const Tensor& v, const Tensor& e, const Graph& g,
                      const FilmParams* p, const ZooConfig& cfg);

// The pairwise function h*(V[s], V[t]) on every edge, [m x d_V].
Tensor relation_function(RelOp kind, const Tensor& v, const Graph& g, const ZooConfig& cfg);

}  // namespace relnas

#endif  // RELNAS_OPS_HPP_
