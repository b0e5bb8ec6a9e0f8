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

#ifndef RELNAS_SEARCH_HPP_
#define RELNAS_SEARCH_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relnas/optim.hpp"
#include "relnas/train.hpp"

namespace relnas {

enum class StrategyKind { kDartsFirstOrder, kSgasLite, kRandom };

std::string strategy_name(StrategyKind k);
StrategyKind parse_strategy(const std::string& s);

struct StrategyConfig {
  StrategyKind kind = StrategyKind::kSgasLite;
  int epochs = 25;
  int warmup_epochs = 10;
  int decide_every = 5;
  double lr_w = 0.025;
  double momentum_w = 0.9;
  double wd_w = 3e-4;
  double lr_alpha = 3e-4;
  double beta1_alpha = 0.5;
  double beta2_alpha = 0.999;
  double wd_alpha = 1e-3;
  int batch_size = 32;

  void check() const;
};

// Weights W and architecture parameters A with their optimizers.
struct BilevelState {
  std::vector<Tensor> weights;
  std::vector<Tensor> alphas;
  Sgd w_opt;
  Adam a_opt;

  BilevelState(std::vector<Tensor> w, std::vector<Tensor> a, const StrategyConfig& cfg);
};

// Per-sample loss closures of one batch; gradients are averaged over them.
using LossBatch = std::vector<std::function<Tensor()>>;

struct StepLosses {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

// First-order bilevel step: one Adam step on A against the validation batch
// with W frozen, then one SGD step on W against the training batch with A
// frozen.
StepLosses bilevel_step(BilevelState& st, const LossBatch& train_batch,
                        const LossBatch& val_batch);

struct Decision {
  std::vector<std::string> frozen;  // link ids fixed this round
  std::vector<std::string> pruned;  // mixtures dropped because their vertex is complete
};

// Freezes, in each space, the mixture link with the largest softmax peak to
// its argmax operation. A vertex whose second link is frozen loses its
// remaining mixtures. No-op when nothing is undecided.
Decision sgas_lite_decide(ArchDag& arch);

// Resolves every mixture: each vertex keeps its top (2 - fixed) mixtures by
// best non-ZERO probability, each taking its argmax over all operations.
ArchDag discretize(const ArchDag& arch);

// Uniformly picks the kept mixtures of every vertex and one operation per
// kept link.
ArchDag random_strategy(const ArchDag& arch, std::uint64_t seed);

// Softmax of a mixture link's alphas.
std::vector<double> link_probs(const Link& l);

// Searches one supernet on the search-train/search-val splits of `d` and
// returns the discretized architecture. `phase` is only used for logging.
ArchDag differentiate(const ArchDag& supernet, const Dataset& d, const StrategyConfig& cfg,
                      std::uint64_t seed, int phase = 0, const LogFn& log = {});

}  // namespace relnas

#endif  // RELNAS_SEARCH_HPP_
