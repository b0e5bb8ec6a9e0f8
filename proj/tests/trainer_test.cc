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

#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "relnas/checkpoint.hpp"
#include "relnas/metrics.hpp"
#include "relnas/optim.hpp"
#include "relnas/proliferate.hpp"
#include "relnas/train.hpp"

namespace relnas {
namespace {

using testing::values;

Dataset with_train(int n) {
  Dataset d;
  d.task = Task::kNodeCls;
  d.num_classes = 2;
  for (int i = 0; i < n; ++i) {
    Graph g = graph_from_edges(2, {{0, 1}}, Tensor::full({2, 1}, static_cast<double>(i)));
    g.node_labels = {0, 1};
    d.train.push_back(g);
  }
  d.d_v = 1;
  d.d_e = 1;
  return d;
}

Dataset tiny_sbm(std::uint64_t seed) {
  SbmParams p;
  p.n = 12;
  p.k = 2;
  p.hint_fraction = 0.5;
  return make_dataset(Task::kNodeCls, 2, 4, 2, 2, seed,
                      [&](std::uint64_t s) { return gen_sbm(p, s); });
}

ArchDag small_arch() {
  ProliferationPlan plan;
  plan.target_size = 2;
  plan.d_v = plan.d_e = 4;
  return proliferation_loop(plan, [](const ArchDag& a, int phase) {
           return random_strategy(a, 30 + static_cast<std::uint64_t>(phase));
         }).arch;
}

TEST_CASE("momentum SGD matches the closed form on a quadratic bowl") {
  const double lr = 0.1, mom = 0.9, wd = 0.01, w0 = 2.0;
  Tensor w = Tensor::scalar(w0, true);
  Sgd opt(lr, mom, wd);
  auto step = [&] {
    zero_grads({w});
    mul_scalar(mul(w, w), 0.5).backward();
    opt.step({w});
  };
  step();
  const double b1 = w0 + wd * w0;
  const double w1 = w0 - lr * b1;
  CHECK(w.item() == w1);
  step();
  const double b2 = mom * b1 + (w1 + wd * w1);
  CHECK(w.item() == w1 - lr * b2);
}

TEST_CASE("Adam matches the textbook update on a scalar") {
  const double lr = 3e-4, b1 = 0.5, b2 = 0.999, wd = 1e-3, eps = 1e-8;
  Tensor w = Tensor::scalar(0.7, true);
  Adam opt(lr, b1, b2, wd, eps);
  double x = 0.7, m = 0, v = 0;
  for (int t = 1; t <= 3; ++t) {
    zero_grads({w});
    mul(w, mul(w, w)).backward();
    opt.step({w});
    const double g = 3 * x * x + wd * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    x -= lr * mh / (std::sqrt(vh) + eps);
    CHECK(std::fabs(w.item() - x) < 1e-12);
  }
}

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(0, 10, 0.025) == 0.025);
  CHECK(cosine_lr(10, 10, 0.025) == 0.0);
  CHECK(cosine_lr(5, 10, 0.025) == doctest::Approx(0.0125).epsilon(1e-15));
}

TEST_CASE("plateau rule halves the rate at the twenty-first bad epoch") {
  PlateauScheduler s(1e-3, 20);
  CHECK(s.step(1.0) == 1e-3);
  for (int bad = 1; bad <= 20; ++bad) CHECK(s.step(1.0) == 1e-3);
  CHECK(s.step(1.0) == 5e-4);
  // The counter restarts after a reduction.
  for (int bad = 1; bad <= 20; ++bad) CHECK(s.step(1.0) == 5e-4);
  CHECK(s.step(1.0) == 2.5e-4);
  CHECK(s.step(0.5) == 2.5e-4);
}

TEST_CASE("metric examples") {
  const std::vector<int> y = {0, 1, 1, 0};
  CHECK(average_accuracy(y, y) == 1.0);
  CHECK(overall_accuracy(y, y) == 1.0);
  CHECK(binary_f1(y, y) == 1.0);
  const std::vector<double> t = {0.5, 1.5};
  CHECK(mean_absolute_error(t, t) == 0.0);

  const std::vector<int> all_pos = {1, 1, 1, 1};
  CHECK(binary_f1(all_pos, y) == doctest::Approx(2.0 / 3).epsilon(1e-15));

  const std::vector<int> labels = {0, 0, 1, 1}, pred = {0, 0, 1, 0};
  CHECK(average_accuracy(pred, labels) == 0.75);
  CHECK(overall_accuracy(pred, labels) == 0.75);

  for (int trial = 0; trial < 20; ++trial) {
    Rng rng(static_cast<std::uint64_t>(trial));
    std::vector<int> a(9), b(9);
    for (auto& x : a) x = static_cast<int>(rng() % 3);
    for (auto& x : b) x = static_cast<int>(rng() % 3);
    for (double m : {average_accuracy(a, b), overall_accuracy(a, b), binary_f1(a, b)})
      CHECK((m >= 0.0 && m <= 1.0));
  }
  Metrics lo{Task::kGraphReg, "MAE", 0.1, 0}, hi{Task::kGraphReg, "MAE", 0.2, 0};
  CHECK(lo.better_than(hi));
  Metrics a{Task::kNodeCls, "AA", 0.9, 0}, b{Task::kNodeCls, "AA", 0.8, 0};
  CHECK(a.better_than(b));
}

TEST_CASE("search split") {
  Dataset ten = with_train(10), eleven = with_train(11);
  CHECK(split_train_val(ten, 1).train.size() == 5);
  CHECK(split_train_val(ten, 1).val.size() == 5);
  CHECK(split_train_val(eleven, 1).train.size() == 6);
  CHECK(split_train_val(eleven, 1).val.size() == 5);
  CHECK(dataset_to_json(split_train_val(ten, 3)) == dataset_to_json(split_train_val(ten, 3)));
  CHECK_THROWS_AS(split_train_val(with_train(1), 1), Error);
}

TEST_CASE("a constant label is learned") {
  Dataset d = tiny_sbm(2);
  for (auto* split : {&d.train, &d.val, &d.test})
    for (Graph& g : *split) g.node_labels.assign(g.node_labels.size(), 1);
  Rng rng(4);
  Network net(small_arch(), spec_for(d), rng);
  RetrainConfig cfg;
  cfg.epochs = 50;
  cfg.lr = 1e-2;
  cfg.batch_size = 2;
  TrainResult r = train_final(net, d, cfg, 5);
  CHECK(r.test.value == 1.0);
}

TEST_CASE("retraining is deterministic and restores the best epoch") {
  Dataset d = tiny_sbm(3);
  RetrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 2;
  auto run = [&](std::vector<std::string>* lines) {
    Rng rng(6);
    Network net(small_arch(), spec_for(d), rng);
    TrainResult r = train_final(net, d, cfg, 9, [&](const std::string& s) {
      if (lines) lines->push_back(s);
    });
    Metrics again = evaluate(net, d.val);
    CHECK(again.value == r.val.value);
    CHECK(again.loss == r.val.loss);
    return r;
  };
  std::vector<std::string> lines;
  TrainResult a = run(&lines), b = run(nullptr);
  CHECK(a.test.value == b.test.value);
  CHECK(a.test.loss == b.test.loss);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(lines.size() == 6);
  CHECK(lines[0].find("retrain_epoch") != std::string::npos);
}

TEST_CASE("batch-norm statistics are not optimizer weights") {
  Dataset d = tiny_sbm(3);
  Rng rng(6);
  Network net(small_arch(), spec_for(d), rng);
  const auto stats = net.head().bn_v.running_var();
  for (const Tensor& t : net.weights())
    CHECK(t.data().data() != net.head().bn_v.running_var().data());
  Snapshot s = snapshot(net);
  CHECK(s.values.size() == net.named_weights().size() + 4);
  CHECK(stats == std::vector<double>(stats.size(), 1.0));
}

TEST_CASE("checkpoint round trip") {
  Dataset d = tiny_sbm(7);
  Rng rng(8);
  Network net(small_arch(), spec_for(d), rng);
  RetrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 2;
  train_final(net, d, cfg, 1);
  const auto dir = std::filesystem::temp_directory_path() / "relnas_trainer_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "ck.json", net);
  Rng other(99);
  // Fresh weights: the architecture file carries structure only.
  Network copy(arch_from_json(arch_to_json(net.arch())), spec_for(d), other);
  CHECK(evaluate(copy, d.test).loss != evaluate(net, d.test).loss);
  load_checkpoint(dir / "ck.json", copy);
  Metrics x = evaluate(net, d.test), y = evaluate(copy, d.test);
  CHECK(x.value == y.value);
  CHECK(x.loss == y.loss);
  CHECK(copy.head().bn_v.running_mean() == net.head().bn_v.running_mean());

  Dataset wide = d;
  wide.num_classes = 3;
  Network mismatch(arch_from_json(arch_to_json(net.arch())), spec_for(wide), other);
  CHECK_THROWS_AS(load_checkpoint(dir / "ck.json", mismatch), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("retraining rejects unresolved architectures and empty splits") {
  Dataset d = tiny_sbm(3);
  Rng rng(1);
  ArchDag sup = init_arch(4, 4, true);
  init_params(sup, rng);
  Network net(sup, spec_for(d), rng);
  CHECK_THROWS_AS(train_final(net, d, RetrainConfig{}, 1), Error);
  Network ok(small_arch(), spec_for(d), rng);
  Dataset empty = d;
  empty.test.clear();
  CHECK_THROWS_AS(train_final(ok, empty, RetrainConfig{}, 1), Error);
  RetrainConfig bad;
  bad.patience = 0;
  CHECK_THROWS_AS(bad.check(), Error);
}

TEST_CASE("graph regression uses the absolute error") {
  Dataset d = gen_graph_reg(10, 4, 8, 3);
  Rng rng(2);
  ArchDag a = small_arch();
  Network net(a, spec_for(d), rng);
  const Graph& g = d.test[0];
  const double out = net.forward(g, false).item();
  CHECK(net.loss(g, false).item() == doctest::Approx(std::fabs(out - *g.graph_target)));
  Metrics m = evaluate(net, d.test);
  CHECK(m.name == "MAE");
  CHECK(m.value >= 0.0);
}

}  // namespace
}  // namespace relnas
