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

#include "relnas/optim.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace relnas {

void zero_grads(const std::vector<Tensor>& params) {
  for (Tensor t : params) t.zero_grad();
}

void Sgd::step(const std::vector<Tensor>& params) {
  for (Tensor p : params) {
    if (!p.has_grad()) continue;
    auto w = p.mutable_data();
    const auto g = p.grad();
    auto& b = buf_[p.id()];
    const bool fresh = b.empty();
    if (fresh) b.assign(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + weight_decay_ * w[i];
      b[i] = fresh ? gi : momentum_ * b[i] + gi;
      w[i] -= lr_ * b[i];
    }
  }
}

void Adam::step(const std::vector<Tensor>& params) {
  for (Tensor p : params) {
    if (!p.has_grad()) continue;
    auto w = p.mutable_data();
    const auto g = p.grad();
    State& s = state_[p.id()];
    if (s.m.empty()) {
      s.m.assign(w.size(), 0.0);
      s.v.assign(w.size(), 0.0);
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i] + weight_decay_ * w[i];
      s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * gi;
      s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * gi * gi;
      w[i] -= lr_ * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + eps_);
    }
  }
}

double cosine_lr(int epoch, int total, double lr0) {
  if (total <= 0) return lr0;
  if (epoch >= total) return 0.0;
  return lr0 * (1.0 + std::cos(std::numbers::pi * epoch / total)) / 2.0;
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor)
    : lr_(lr), patience_(patience), factor_(factor),
      best_(std::numeric_limits<double>::infinity()) {
  if (lr <= 0.0 || patience < 1 || factor <= 0.0 || factor >= 1.0)
    throw Error("PlateauScheduler: need lr > 0, patience >= 1 and factor in (0, 1)");
}

double PlateauScheduler::step(double loss) {
  if (loss < best_) {
    best_ = loss;
    bad_ = 0;
  } else if (++bad_ > patience_) {
    lr_ *= factor_;
    bad_ = 0;
  }
  return lr_;
}

}  // namespace relnas
