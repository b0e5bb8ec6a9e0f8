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

#ifndef RELNAS_TRAIN_HPP_
#define RELNAS_TRAIN_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relnas/metrics.hpp"
#include "relnas/network.hpp"

namespace relnas {

// One JSON object per line; the callee owns formatting.
using LogFn = std::function<void(const std::string&)>;

// Search-phase split of the training graphs: a seeded shuffle, then the
// first ceil(n/2) graphs become the search-train split and the rest the
// search-val split. The test split is carried over unchanged.
Dataset split_train_val(const Dataset& d, std::uint64_t seed);

struct RetrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int patience = 20;
  double factor = 0.5;
  double dropout = 0.5;
  int batch_size = 32;

  void check() const;
};

// Task metric and mean loss over a split, in eval mode.
Metrics evaluate(Network& net, const std::vector<Graph>& graphs);

struct TrainResult {
  Metrics val;   // at the best epoch
  Metrics test;  // at the best epoch
  int best_epoch = -1;
  double final_lr = 0.0;
};

// Retrains every weight of a differentiated architecture with Adam, halving
// the rate on validation-loss plateaus, and restores the weights of the epoch
// with the best validation metric before scoring the test split.
TrainResult train_final(Network& net, const Dataset& d, const RetrainConfig& cfg,
                        std::uint64_t seed, const LogFn& log = {});

// Values of every named weight and batch-norm statistic.
struct Snapshot {
  std::vector<std::vector<double>> values;
};
Snapshot snapshot(const Network& net);
void restore(Network& net, const Snapshot& s);

// Runs fn over graphs in shuffled batches, accumulating mean-scaled gradients
// of the returned losses; after each batch calls step(). Returns the mean loss.
double run_batches(const std::vector<Graph>& graphs, int batch_size, Rng& rng,
                   const std::function<Tensor(const Graph&)>& loss_of,
                   const std::function<void()>& before, const std::function<void()>& step);

}  // namespace relnas

#endif  // RELNAS_TRAIN_HPP_
