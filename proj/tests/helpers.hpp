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

#ifndef RELNAS_TESTS_HELPERS_HPP_
#define RELNAS_TESTS_HELPERS_HPP_

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relnas/graph.hpp"
#include "relnas/random.hpp"
#include "relnas/tensor.hpp"

namespace relnas::testing {

inline Tensor mat(std::size_t r, std::size_t c, std::vector<double> v, bool rg = false) {
  return Tensor({r, c}, std::move(v), rg);
}

inline Tensor vec(std::vector<double> v, bool rg = false) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v), rg);
}

inline Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0,
                            bool rg = false) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return Tensor(std::move(s), std::move(v), rg);
}

inline std::vector<double> values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a.at(i) - b.at(i)));
  return m;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (std::bit_cast<std::uint64_t>(a.at(i)) != std::bit_cast<std::uint64_t>(b.at(i)))
      return false;
  return true;
}

// Random directed graph without self loops on n nodes, every pair with
// probability p; features uniform in [-1, 1].
inline Graph random_graph(int n, double p, int d_v, int d_e, Rng& rng) {
  std::vector<Edge> edges;
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      if (s != t && uniform01(rng) < p) edges.emplace_back(s, t);
  if (edges.empty()) edges.emplace_back(0, n - 1);
  Tensor v = random_tensor({static_cast<std::size_t>(n), static_cast<std::size_t>(d_v)}, rng);
  Tensor e = random_tensor({edges.size(), static_cast<std::size_t>(d_e)}, rng);
  return graph_from_edges(n, edges, v, e);
}

}  // namespace relnas::testing

#endif  // RELNAS_TESTS_HELPERS_HPP_
