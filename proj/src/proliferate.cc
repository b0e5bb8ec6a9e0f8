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

#include "relnas/proliferate.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace relnas {

int ProliferationPlan::divisions() const {
  int k = 0;
  for (int size = 1; size < target_size; size *= 2) ++k;
  return k;
}

void ProliferationPlan::check() const {
  if (target_size < 1) throw Error("proliferation plan: target_size must be at least 1");
  if (static_cast<int>(epochs.size()) < divisions() + 1)
    throw Error("proliferation plan: need " + std::to_string(divisions() + 1) +
                " epoch budgets for target size " + std::to_string(target_size));
  for (int e : epochs)
    if (e < 1) throw Error("proliferation plan: epoch budgets must be positive");
  if (d_v < 1 || d_e < 1) throw Error("proliferation plan: widths must be positive");
}

namespace {

Link mixture(int src, int dst) {
  Link l;
  l.src = src;
  l.dst = dst;
  l.alpha = Tensor::zeros({static_cast<std::size_t>(kNumOps)}, true);
  return l;
}

std::vector<Space> spaces(const ArchDag& a) {
  if (a.relation_space) return {Space::kNode, Space::kRelation};
  return {Space::kNode};
}

}  // namespace

ArchDag init_arch(int d_v, int d_e, bool relation_space) {
  ArchDag a;
  a.order = {1};
  a.d_v = d_v;
  a.d_e = d_e;
  a.relation_space = relation_space;
  for (Space s : spaces(a)) {
    a.links(s).push_back(mixture(kIn0, 1));
    a.links(s).push_back(mixture(kIn1, 1));
  }
  validate(a);
  return a;
}

ArchDag init_arch(const ProliferationPlan& plan, Rng& rng) {
  ArchDag a = init_arch(plan.d_v, plan.d_e, plan.relation_space);
  a.zoo = plan.zoo;
  init_params(a, rng);
  return a;
}

ArchDag divide(const ArchDag& arch) {
  if (arch.has_mixtures()) throw Error("divide: differentiate first (mixture links present)");
  validate(arch);
  const int l = static_cast<int>(arch.order.size());
  std::set<int> ids(arch.order.begin(), arch.order.end());
  if (ids.empty() || *ids.begin() != 1 || *ids.rbegin() != l)
    throw Error("divide: vertex ids must be exactly 1..N");
  ArchDag out = arch;
  for (Space s : spaces(arch)) {
    const std::vector<Link> before = arch.links(s);
    std::vector<Link> links = before;
    for (int i : arch.order) {
      links.push_back(mixture(i, i + l));
      for (const Link& e : before)
        if (e.dst == i) links.push_back(mixture(e.src, i + l));
    }
    for (Link& e : links)
      if (ids.count(e.src) && e.src + l != e.dst) e.src += l;
    out.links(s) = std::move(links);
  }
  out.order.clear();
  for (int i : arch.order) {
    out.order.push_back(i);
    out.order.push_back(i + l);
  }
  validate(out);
  return out;
}

IterationAudit count_ops(const ArchDag& arch, Space s, int num_ops) {
  IterationAudit a;
  for (const Link& l : arch.links(s)) (l.is_mixture() ? a.mixtures : a.fixed)++;
  a.primitives = a.fixed + a.mixtures * num_ops;
  return a;
}

IterationAudit audit_iteration(const ArchDag& arch, int i, int num_ops) {
  if (i < 1) throw Error("audit_iteration: iterations start at 1");
  IterationAudit want;
  want.i = i;
  want.fixed = 1 << i;
  want.mixtures = 3 * (1 << (i - 1));
  want.primitives = want.fixed + want.mixtures * num_ops;
  for (Space s : spaces(arch)) {
    IterationAudit got = count_ops(arch, s, num_ops);
    if (got.fixed != want.fixed || got.mixtures != want.mixtures)
      throw Error("audit_iteration: " + std::string(space_name(s)) + " space at iteration " +
                  std::to_string(i) + " has " + std::to_string(got.fixed) + " fixed links and " +
                  std::to_string(got.mixtures) + " mixtures, expected " +
                  std::to_string(want.fixed) + " and " + std::to_string(want.mixtures));
  }
  return want;
}

std::string audits_to_json(const std::vector<IterationAudit>& audits) {
  nlohmann::json it = nlohmann::json::array();
  long total = 0;
  for (const auto& a : audits) {
    it.push_back({{"i", a.i}, {"fixed", a.fixed}, {"mixtures", a.mixtures},
                  {"primitives", a.primitives}});
    total += a.primitives;
  }
  return nlohmann::json({{"iterations", it}, {"total_primitives", total}}).dump(2);
}

ProliferationResult proliferation_loop(const ProliferationPlan& plan, const Differentiator& diff) {
  plan.check();
  ProliferationResult res;
  ArchDag arch = init_arch(plan.d_v, plan.d_e, plan.relation_space);
  arch.zoo = plan.zoo;
  for (int phase = 0;; ++phase) {
    arch = diff(arch, phase);
    if (arch.has_mixtures()) throw Error("proliferation_loop: strategy left mixture links");
    validate(arch);
    if (static_cast<int>(arch.n_vertices()) >= plan.target_size) break;
    arch = divide(arch);
    res.audits.push_back(audit_iteration(arch, phase + 1, kNumOps));
  }
  res.arch = std::move(arch);
  return res;
}

ProliferationResult proliferation_loop(const ProliferationPlan& plan, const Dataset& d,
                                       const LogFn& log) {
  plan.check();
  plan.strategy.check();
  const Dataset search =
      plan.strategy.kind == StrategyKind::kRandom ? d : split_train_val(d, derive_seed(plan.seed, 0));
  return proliferation_loop(plan, [&](const ArchDag& supernet, int phase) {
    StrategyConfig cfg = plan.strategy;
    cfg.epochs = plan.epochs[static_cast<std::size_t>(phase)];
    cfg.warmup_epochs = std::min(cfg.warmup_epochs, cfg.epochs - 1);
    return differentiate(supernet, search, cfg,
                         derive_seed(plan.seed, static_cast<std::uint64_t>(phase) + 1), phase, log);
  });
}

ArchDag one_shot_supernet(int n_vertices, int d_v, int d_e, bool relation_space) {
  if (n_vertices < 1) throw Error("one_shot_supernet: need at least one vertex");
  ArchDag a;
  a.d_v = d_v;
  a.d_e = d_e;
  a.relation_space = relation_space;
  a.one_shot = true;
  for (int v = 1; v <= n_vertices; ++v) a.order.push_back(v);
  for (Space s : spaces(a))
    for (int v = 1; v <= n_vertices; ++v) {
      a.links(s).push_back(mixture(kIn0, v));
      a.links(s).push_back(mixture(kIn1, v));
      for (int u = 1; u < v; ++u) a.links(s).push_back(mixture(u, v));
    }
  validate(a);
  return a;
}

}  // namespace relnas
