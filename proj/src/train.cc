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

#include "relnas/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "relnas/optim.hpp"

namespace relnas {

Dataset split_train_val(const Dataset& d, std::uint64_t seed) {
  if (d.train.size() < 2) throw Error("split_train_val: need at least 2 training graphs");
  std::vector<std::size_t> idx(d.train.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  Dataset out;
  out.task = d.task;
  out.d_v = d.d_v;
  out.d_e = d.d_e;
  out.num_classes = d.num_classes;
  const std::size_t n_train = (idx.size() + 1) / 2;
  for (std::size_t i = 0; i < idx.size(); ++i)
    (i < n_train ? out.train : out.val).push_back(d.train[idx[i]]);
  out.test = d.test;
  return out;
}

void RetrainConfig::check() const {
  if (epochs < 1 || lr <= 0.0 || weight_decay < 0.0 || patience < 1 || batch_size < 1 ||
      dropout < 0.0 || dropout >= 1.0 || factor <= 0.0 || factor >= 1.0)
    throw Error("retrain config: need epochs, lr, patience, batch_size >= 1 and rates in range");
}

namespace {

int argmax_row(std::span<const double> d, std::size_t row, std::size_t cols) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < cols; ++j)
    if (d[row * cols + j] > d[row * cols + best]) best = j;
  return static_cast<int>(best);
}

}  // namespace

Metrics evaluate(Network& net, const std::vector<Graph>& graphs) {
  if (graphs.empty()) throw Error("evaluate: empty split");
  NoGradGuard guard;
  const Task task = net.spec().task;
  std::vector<int> pred, labels;
  std::vector<double> reg_pred, reg_target;
  double loss_sum = 0.0;
  for (const Graph& g : graphs) {
    Tensor out = net.forward(g, false);
    loss_sum += task_loss(task, out, g).item();
    const auto d = out.data();
    const std::size_t c = out.cols();
    switch (task) {
      case Task::kNodeCls:
        if (g.node_labels.empty()) throw Error("evaluate: missing node labels");
        for (std::size_t i = 0; i < out.rows(); ++i) pred.push_back(argmax_row(d, i, c));
        labels.insert(labels.end(), g.node_labels.begin(), g.node_labels.end());
        break;
      case Task::kEdgeCls:
        if (g.edge_labels.empty()) throw Error("evaluate: missing edge labels");
        for (std::size_t i = 0; i < out.rows(); ++i) pred.push_back(argmax_row(d, i, c));
        labels.insert(labels.end(), g.edge_labels.begin(), g.edge_labels.end());
        break;
      case Task::kGraphReg:
        if (!g.graph_target) throw Error("evaluate: missing graph target");
        reg_pred.push_back(d[0]);
        reg_target.push_back(*g.graph_target);
        break;
      case Task::kGraphCls:
        if (!g.graph_target) throw Error("evaluate: missing graph label");
        pred.push_back(argmax_row(d, 0, c));
        labels.push_back(static_cast<int>(*g.graph_target));
        break;
    }
  }
  Metrics m;
  m.task = task;
  m.name = metric_name(task);
  m.loss = loss_sum / static_cast<double>(graphs.size());
  switch (task) {
    case Task::kNodeCls: m.value = average_accuracy(pred, labels); break;
    case Task::kEdgeCls: m.value = binary_f1(pred, labels); break;
    case Task::kGraphReg: m.value = mean_absolute_error(reg_pred, reg_target); break;
    case Task::kGraphCls: m.value = overall_accuracy(pred, labels); break;
  }
  return m;
}

double run_batches(const std::vector<Graph>& graphs, int batch_size, Rng& rng,
                   const std::function<Tensor(const Graph&)>& loss_of,
                   const std::function<void()>& before, const std::function<void()>& step) {
  std::vector<std::size_t> idx(graphs.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  double total = 0.0;
  const auto bs = static_cast<std::size_t>(std::max(1, batch_size));
  for (std::size_t start = 0; start < idx.size(); start += bs) {
    const std::size_t end = std::min(idx.size(), start + bs);
    before();
    for (std::size_t k = start; k < end; ++k) {
      Tensor loss = loss_of(graphs[idx[k]]);
      const double v = loss.item();
      if (!std::isfinite(v)) throw Error("training: non-finite loss");
      total += v;
      mul_scalar(loss, 1.0 / static_cast<double>(end - start)).backward();
    }
    step();
  }
  return total / static_cast<double>(idx.size());
}

Snapshot snapshot(const Network& net) {
  Snapshot s;
  for (const auto& [name, t] : net.named_weights())
    s.values.emplace_back(t.data().begin(), t.data().end());
  const auto& head = net.head();
  s.values.push_back(head.bn_v.running_mean());
  s.values.push_back(head.bn_v.running_var());
  s.values.push_back(head.bn_e.running_mean());
  s.values.push_back(head.bn_e.running_var());
  return s;
}

void restore(Network& net, const Snapshot& s) {
  auto named = net.named_weights();
  if (s.values.size() != named.size() + 4) throw Error("restore: snapshot does not match network");
  for (std::size_t i = 0; i < named.size(); ++i) {
    auto w = named[i].second.mutable_data();
    if (w.size() != s.values[i].size()) throw Error("restore: size mismatch for " + named[i].first);
    std::copy(s.values[i].begin(), s.values[i].end(), w.begin());
  }
  const std::size_t b = named.size();
  net.head().bn_v.running_mean() = s.values[b];
  net.head().bn_v.running_var() = s.values[b + 1];
  net.head().bn_e.running_mean() = s.values[b + 2];
  net.head().bn_e.running_var() = s.values[b + 3];
}

TrainResult train_final(Network& net, const Dataset& d, const RetrainConfig& cfg,
                        std::uint64_t seed, const LogFn& log) {
  cfg.check();
  if (net.arch().has_mixtures()) throw Error("train_final: architecture still has mixture links");
  if (d.train.empty() || d.val.empty() || d.test.empty())
    throw Error("train_final: train, val and test splits must be non-empty");
  Rng order_rng(derive_seed(seed, 1));
  Rng drop_rng(derive_seed(seed, 2));
  Adam opt(cfg.lr, 0.9, 0.999, cfg.weight_decay);
  PlateauScheduler sched(cfg.lr, cfg.patience, cfg.factor);
  const auto weights = net.weights();
  TrainResult res;
  Snapshot best;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double train_loss = run_batches(
        d.train, cfg.batch_size, order_rng,
        [&](const Graph& g) { return net.loss(g, true, &drop_rng, cfg.dropout); },
        [&] { zero_grads(weights); }, [&] { opt.step(weights); });
    Metrics val = evaluate(net, d.val);
    if (!std::isfinite(val.loss)) throw Error("train_final: non-finite validation loss");
    const bool improved =
        res.best_epoch < 0 || val.better_than(res.val) ||
        (val.value == res.val.value && val.loss < res.val.loss);
    if (improved) {
      res.val = val;
      res.best_epoch = epoch;
      best = snapshot(net);
    }
    opt.set_lr(sched.step(val.loss));
    if (log) {
      nlohmann::json j = {{"event", "retrain_epoch"}, {"epoch", epoch},
                          {"train_loss", train_loss}, {"val_loss", val.loss},
                          {"val_" + val.name, val.value}, {"lr", opt.lr()}};
      log(j.dump());
    }
  }
  res.final_lr = opt.lr();
  restore(net, best);
  res.test = evaluate(net, d.test);
  return res;
}

}  // namespace relnas
