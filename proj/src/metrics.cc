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

#include "relnas/metrics.hpp"

#include <cmath>
#include <map>

namespace relnas {

namespace {

void same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw Error(std::string(what) + ": prediction and label counts differ");
  if (a == 0) throw Error(std::string(what) + ": empty input");
}

}  // namespace

double average_accuracy(std::span<const int> pred, std::span<const int> labels) {
  same_size(pred.size(), labels.size(), "average_accuracy");
  std::map<int, std::pair<int, int>> per;  // class -> (hits, total)
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& c = per[labels[i]];
    c.first += pred[i] == labels[i];
    ++c.second;
  }
  double sum = 0.0;
  for (const auto& [cls, c] : per) sum += static_cast<double>(c.first) / c.second;
  return sum / static_cast<double>(per.size());
}

double overall_accuracy(std::span<const int> pred, std::span<const int> labels) {
  same_size(pred.size(), labels.size(), "overall_accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double binary_f1(std::span<const int> pred, std::span<const int> labels) {
  same_size(pred.size(), labels.size(), "binary_f1");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pred[i] == 1 && labels[i] == 1) ++tp;
    else if (pred[i] == 1) ++fp;
    else if (labels[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

double mean_absolute_error(std::span<const double> pred, std::span<const double> target) {
  same_size(pred.size(), target.size(), "mean_absolute_error");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

std::string metric_name(Task t) {
  switch (t) {
    case Task::kNodeCls: return "AA";
    case Task::kEdgeCls: return "F1";
    case Task::kGraphReg: return "MAE";
    case Task::kGraphCls: return "OA";
  }
  return "?";
}

bool Metrics::better_than(const Metrics& other) const {
  return task == Task::kGraphReg ? value < other.value : value > other.value;
}

}  // namespace relnas
