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

#include "doctest.h"
#include "helpers.hpp"
#include "relnas/heads.hpp"

namespace relnas {
namespace {

using testing::mat;
using testing::random_tensor;
using testing::values;

ForwardState state_of(std::vector<Tensor> vs, std::vector<Tensor> es) {
  ForwardState st;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    st.v[static_cast<int>(i) + 1] = vs[i];
    st.e[static_cast<int>(i) + 1] = es[i];
  }
  return st;
}

// Plain-loop oracle: relu(BN_train([X_1 | X_2] W)) with unit scale, zero shift.
std::vector<double> trace(const Tensor& x1, const Tensor& x2, const Tensor& w) {
  const std::size_t n = x1.rows(), d = x1.cols(), out = w.cols();
  std::vector<double> h(n * out, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out; ++o) {
      double s = 0;
      for (std::size_t j = 0; j < d; ++j) s += x1.at(i, j) * w.at(j, o);
      for (std::size_t j = 0; j < d; ++j) s += x2.at(i, j) * w.at(d + j, o);
      h[i * out + o] = s;
    }
  for (std::size_t o = 0; o < out; ++o) {
    double mu = 0, var = 0;
    for (std::size_t i = 0; i < n; ++i) mu += h[i * out + o];
    mu /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) var += std::pow(h[i * out + o] - mu, 2);
    var /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      h[i * out + o] = std::max(0.0, (h[i * out + o] - mu) / std::sqrt(var + 1e-5));
  }
  return h;
}

TEST_CASE("head shapes chain with the architecture") {
  Rng rng(1);
  HeadParams p = HeadParams::init(3, 4, 2, 5, false, rng);
  CHECK(p.w_v.shape() == Shape{12, 4});
  CHECK(p.w_e.shape() == Shape{6, 2});
  CHECK(p.c_v.shape() == Shape{4, 5});
  CHECK(p.c_e.shape() == Shape{2, 5});
  CHECK(p.c_g.shape() == Shape{6, 5});
  HeadParams q = HeadParams::init(3, 4, 2, 5, true, rng);
  CHECK(q.c_e.shape() == Shape{8, 5});
}

TEST_CASE("global features of zero vertices are zero in eval mode") {
  Rng rng(2);
  HeadParams p = HeadParams::init(2, 3, 2, 2, false, rng);
  auto st = state_of({Tensor::zeros({4, 3}), Tensor::zeros({4, 3})},
                     {Tensor::zeros({5, 2}), Tensor::zeros({5, 2})});
  auto [v, e] = global_features(st, {1, 2}, p, false);
  for (double x : values(v)) CHECK(x == 0.0);
  for (double x : values(e)) CHECK(x == 0.0);
}

TEST_CASE("one vertex maps its features directly") {
  Rng rng(3);
  HeadParams p = HeadParams::init(1, 2, 2, 2, false, rng);
  Tensor v1 = random_tensor({4, 2}, rng), e1 = random_tensor({3, 2}, rng);
  auto [v, e] = global_features(state_of({v1}, {e1}), {1}, p, true);
  BatchNorm bn(2);
  CHECK(testing::max_abs_diff(v, relu(bn.forward(matmul(v1, p.w_v), true))) < 1e-14);
}

TEST_CASE("two vertices match a plain-loop trace") {
  Rng rng(4);
  HeadParams p = HeadParams::init(2, 3, 2, 2, false, rng);
  Tensor v1 = random_tensor({5, 3}, rng), v2 = random_tensor({5, 3}, rng);
  Tensor e1 = random_tensor({6, 2}, rng), e2 = random_tensor({6, 2}, rng);
  auto [v, e] = global_features(state_of({v1, v2}, {e1, e2}), {1, 2}, p, true);
  auto tv = trace(v1, v2, p.w_v), te = trace(e1, e2, p.w_e);
  for (std::size_t i = 0; i < tv.size(); ++i) CHECK(std::fabs(v.at(i) - tv[i]) < 1e-12);
  for (std::size_t i = 0; i < te.size(); ++i) CHECK(std::fabs(e.at(i) - te[i]) < 1e-12);
}

TEST_CASE("graph readout examples") {
  Tensor v = Tensor::full({4, 2}, 1.5), e = Tensor::full({3, 1}, -2.0);
  CHECK(values(graph_readout(v, e, 1)) == std::vector<double>{1.5, 1.5, -2.0});
  CHECK(values(graph_readout(mat(1, 2, {3, 4}), mat(1, 1, {5}), 1)) ==
        std::vector<double>{3, 4, 5});
  CHECK(values(graph_readout(mat(1, 2, {3, 4}), Tensor(), 2)) ==
        std::vector<double>{3, 4, 0, 0});

  Rng rng(5);
  Tensor rv = random_tensor({7, 3}, rng), re = random_tensor({9, 2}, rng);
  Tensor g = graph_readout(rv, re, 2);
  for (std::size_t j = 0; j < 3; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 7; ++i) s += rv.at(i, j);
    CHECK(g.at(j) == doctest::Approx(s / 7).epsilon(1e-14));
  }
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 9; ++i) s += re.at(i, j);
    CHECK(g.at(3 + j) == doctest::Approx(s / 9).epsilon(1e-14));
  }
}

TEST_CASE("graph readout ignores row order") {
  Rng rng(6);
  Tensor v = random_tensor({6, 2}, rng), e = random_tensor({5, 2}, rng);
  auto perm = [](const Tensor& t, std::vector<int> idx) {
    return gather_rows(t, std::make_shared<const std::vector<int>>(std::move(idx)));
  };
  Tensor a = graph_readout(v, e, 2);
  Tensor b = graph_readout(perm(v, {5, 3, 1, 0, 2, 4}), perm(e, {4, 0, 3, 1, 2}), 2);
  CHECK(testing::max_abs_diff(a, b) < 1e-14);
}

TEST_CASE("predictor examples") {
  Rng rng(7);
  HeadParams p = HeadParams::init(1, 2, 2, 2, false, rng);
  for (auto& x : p.c_v.mutable_data()) x = 0.0;
  for (double x : values(predict_node(random_tensor({3, 2}, rng), p))) CHECK(x == 0.0);

  HeadParams r = HeadParams::init(1, 2, 2, 1, false, rng);
  CHECK(predict_graph(Tensor::zeros({4}), r).item() == 0.0);
  CHECK(predict_graph(Tensor::zeros({4}), r).shape() == Shape{1, 1});

  std::vector<double> eye = {1, 0, 0, 1};
  for (std::size_t i = 0; i < 4; ++i) p.c_e.mutable_data()[i] = eye[i];
  Tensor eg = random_tensor({5, 2}, rng);
  CHECK(values(predict_edge(eg, p)) == values(eg));
}

TEST_CASE("edge predictions depend only on edge features") {
  Rng rng(8);
  HeadParams p = HeadParams::init(2, 3, 2, 2, false, rng);
  Tensor v1 = random_tensor({4, 3}, rng), v2 = random_tensor({4, 3}, rng);
  Tensor e1 = random_tensor({5, 2}, rng), e2 = random_tensor({5, 2}, rng);
  auto [va, ea] = global_features(state_of({v1, v2}, {e1, e2}), {1, 2}, p, false);
  auto [vb, eb] = global_features(state_of({mul_scalar(v1, 3), v2}, {e1, e2}), {1, 2}, p, false);
  CHECK(testing::max_abs_diff(va, vb) > 0);
  CHECK(testing::bit_equal(predict_edge(ea, p), predict_edge(eb, p)));
}

TEST_CASE("head gradients match central differences") {
  Rng rng(9);
  HeadParams p = HeadParams::init(2, 3, 2, 3, false, rng);
  Tensor v1 = random_tensor({4, 3}, rng, -1, 1, true), v2 = random_tensor({4, 3}, rng);
  Tensor e1 = random_tensor({5, 2}, rng, -1, 1, true), e2 = random_tensor({5, 2}, rng);
  const std::vector<int> nl = {0, 1, 2, 1}, el = {2, 0, 1, 1, 0}, gl = {1};
  auto loss = [&] {
    auto [v, e] = global_features(state_of({v1, v2}, {e1, e2}), {1, 2}, p, true);
    Tensor g = predict_graph(graph_readout(v, e, 2), p);
    return add(add(cross_entropy(predict_node(v, p), nl), cross_entropy(predict_edge(e, p), el)),
               cross_entropy(g, gl));
  };
  CHECK(finite_diff_check(loss, v1, 1e-6) < 1e-5);
  CHECK(finite_diff_check(loss, e1, 1e-6) < 1e-5);
  for (auto& [name, t] : p.named_tensors()) {
    CAPTURE(name);
    CHECK(finite_diff_check(loss, t, 1e-6) < 1e-5);
  }
}

TEST_CASE("edge logits from node pairs") {
  Rng rng(10);
  HeadParams p = HeadParams::init(1, 2, 1, 2, true, rng);
  Graph g = graph_from_edges(3, {{0, 2}, {1, 2}}, Tensor::zeros({3, 1}));
  Tensor vg = random_tensor({3, 2}, rng);
  Tensor out = predict_edge_from_nodes(vg, g, p);
  // Edge (0, 2): [V_g[0] | V_g[2]] C_E.
  for (std::size_t c = 0; c < 2; ++c) {
    const double want = vg.at(0, 0) * p.c_e.at(0, c) + vg.at(0, 1) * p.c_e.at(1, c) +
                        vg.at(2, 0) * p.c_e.at(2, c) + vg.at(2, 1) * p.c_e.at(3, c);
    CHECK(out.at(0, c) == doctest::Approx(want).epsilon(1e-14));
  }
}

TEST_CASE("dropout") {
  Rng rng(11);
  Tensor x = Tensor::full({100, 10}, 1.0);
  CHECK(testing::bit_equal(dropout(x, 0.0, rng), x));
  Tensor y = dropout(x, 0.5, rng);
  int kept = 0;
  for (double v : values(y)) {
    CHECK((v == 0.0 || v == 2.0));
    kept += v > 0;
  }
  CHECK(std::abs(kept - 500) < 80);
}

}  // namespace
}  // namespace relnas
