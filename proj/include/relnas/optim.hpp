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

#ifndef RELNAS_OPTIM_HPP_
#define RELNAS_OPTIM_HPP_

#include <map>
#include <vector>

#include "relnas/tensor.hpp"

namespace relnas {

// Zeroes the gradients of every tensor in the list.
void zero_grads(const std::vector<Tensor>& params);

// Momentum SGD with L2 weight decay folded into the gradient:
//   g += wd * w;  buf = momentum * buf + g;  w -= lr * buf.
class Sgd {
 public:
  Sgd(double lr, double momentum, double weight_decay)
      : lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {}
  void step(const std::vector<Tensor>& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  double lr_, momentum_, weight_decay_;
  std::map<const void*, std::vector<double>> buf_;
};

// Adam with L2 weight decay folded into the gradient and bias-corrected
// moments. Tensors without a gradient are skipped.
class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double weight_decay, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {}
  void step(const std::vector<Tensor>& params);
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  struct State {
    std::vector<double> m, v;
    long t = 0;
  };
  double lr_, beta1_, beta2_, weight_decay_, eps_;
  std::map<const void*, State> state_;
};

// lr0 * (1 + cos(pi * epoch / total)) / 2.
double cosine_lr(int epoch, int total, double lr0);

// Multiplies the rate by `factor` once the monitored loss has failed to
// improve for more than `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, int patience, double factor = 0.5);
  // Feeds one epoch's validation loss; returns the rate for the next epoch.
  double step(double loss);
  double lr() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double best_;
  int bad_ = 0;
};

}  // namespace relnas

#endif  // RELNAS_OPTIM_HPP_
