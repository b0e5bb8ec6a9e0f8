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

#ifndef RELNAS_METRICS_HPP_
#define RELNAS_METRICS_HPP_

#include <span>
#include <string>

#include "relnas/graph.hpp"

namespace relnas {

// Mean of the per-class accuracies over classes present in `labels`.
double average_accuracy(std::span<const int> pred, std::span<const int> labels);
// Fraction of exact matches.
double overall_accuracy(std::span<const int> pred, std::span<const int> labels);
// Binary F1 on class 1; 0 when there are no true or predicted positives.
double binary_f1(std::span<const int> pred, std::span<const int> labels);
double mean_absolute_error(std::span<const double> pred, std::span<const double> target);

struct Metrics {
  Task task = Task::kNodeCls;
  std::string name;    // "AA", "F1", "MAE" or "OA"
  double value = 0.0;  // the task metric
  double loss = 0.0;   // mean task loss over the split
  // Lower is better only for MAE.
  bool better_than(const Metrics& other) const;
};

std::string metric_name(Task t);

}  // namespace relnas

#endif  // RELNAS_METRICS_HPP_
