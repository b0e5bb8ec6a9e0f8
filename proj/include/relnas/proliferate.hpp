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

#ifndef RELNAS_PROLIFERATE_HPP_
#define RELNAS_PROLIFERATE_HPP_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "relnas/search.hpp"

namespace relnas {

struct ProliferationPlan {
  int target_size = 4;
  // Differentiation epochs per phase; phase 0 searches the initial
  // one-vertex supernet, phase k the supernet after the k-th division.
  std::vector<int> epochs = {25, 25, 25, 45, 85};
  StrategyConfig strategy;
  std::uint64_t seed = 0;
  int d_v = 16;
  int d_e = 16;
  bool relation_space = true;
  ZooConfig zoo;

  // Number of divisions needed to reach target_size from one vertex.
  int divisions() const;
  void check() const;
};

// One intermediate vertex fed by mixture links from both inputs, per space,
// with zero alphas and fresh operation weights.
ArchDag init_arch(const ProliferationPlan& plan, Rng& rng);
// Same structure without weights.
ArchDag init_arch(int d_v, int d_e, bool relation_space);

// Splits every vertex of a differentiated architecture. With l vertices, the
// child of vertex i is i + l, placed right after i. The child receives mixture
// links from i and from each source of i's incoming links; afterwards every
// link leaving an old intermediate vertex s, other than s -> s + l, is moved
// to leave s + l instead. Both spaces are divided alike. Moved links keep
// their operation and weights; new mixtures start with zero alphas and no
// weights.
ArchDag divide(const ArchDag& arch);

struct IterationAudit {
  int i = 0;
  int fixed = 0;
  int mixtures = 0;
  int primitives = 0;  // fixed + mixtures * num_ops
};

// Counts recomputed from one space's links.
IterationAudit count_ops(const ArchDag& arch, Space s, int num_ops);
// Checks the post-division state of iteration i (fixed = 2^i,
// mixtures = 3 * 2^(i-1)) in every active space.
IterationAudit audit_iteration(const ArchDag& arch, int i, int num_ops);
std::string audits_to_json(const std::vector<IterationAudit>& audits);

// Resolves every mixture of a supernet; receives the phase index.
using Differentiator = std::function<ArchDag(const ArchDag& supernet, int phase)>;

struct ProliferationResult {
  ArchDag arch;
  std::vector<IterationAudit> audits;
};

// Proliferation loop: differentiate, then divide and audit, until the architecture
// has at least target_size vertices.
ProliferationResult proliferation_loop(const ProliferationPlan& plan, const Differentiator& diff);
// Uses the plan's strategy on the search-train/search-val split of `d`.
ProliferationResult proliferation_loop(const ProliferationPlan& plan, const Dataset& d,
                                       const LogFn& log = {});

// Conventional one-shot supernet: every vertex draws mixtures from both
// inputs and all earlier vertices.
ArchDag one_shot_supernet(int n_vertices, int d_v, int d_e, bool relation_space);

}  // namespace relnas

#endif  // RELNAS_PROLIFERATE_HPP_
