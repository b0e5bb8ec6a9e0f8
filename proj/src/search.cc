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

#include "relnas/search.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace relnas {

std::string strategy_name(StrategyKind k) {
  switch (k) {
    case StrategyKind::kDartsFirstOrder: return "darts_first_order";
    case StrategyKind::kSgasLite: return "sgas_lite";
    case StrategyKind::kRandom: return "random";
  }
  return "?";
}

StrategyKind parse_strategy(const std::string& s) {
  for (auto k : {StrategyKind::kDartsFirstOrder, StrategyKind::kSgasLite, StrategyKind::kRandom})
    if (strategy_name(k) == s) return k;
  throw Error("unknown strategy '" + s + "' (expected darts_first_order, sgas_lite or random)");
}

void StrategyConfig::check() const {
  if (epochs < 1) throw Error("strategy config: epochs must be positive");
  if (warmup_epochs < 0 || warmup_epochs >= epochs)
    throw Error("strategy config: warmup_epochs must be in [0, epochs)");
  if (decide_every < 1) throw Error("strategy config: decide_every must be at least 1");
  if (lr_w < 0.0 || lr_alpha < 0.0 || wd_w < 0.0 || wd_alpha < 0.0 || momentum_w < 0.0 ||
      beta1_alpha < 0.0 || beta1_alpha >= 1.0 || beta2_alpha < 0.0 || beta2_alpha >= 1.0)
    throw Error("strategy config: rates out of range");
  if (batch_size < 1) throw Error("strategy config: batch_size must be positive");
}

BilevelState::BilevelState(std::vector<Tensor> w, std::vector<Tensor> a, const StrategyConfig& cfg)
    : weights(std::move(w)),
      alphas(std::move(a)),
      w_opt(cfg.lr_w, cfg.momentum_w, cfg.wd_w),
      a_opt(cfg.lr_alpha, cfg.beta1_alpha, cfg.beta2_alpha, cfg.wd_alpha) {}

namespace {

// Accumulates the mean gradient of a batch into the currently trainable
// tensors and returns the mean loss.
double accumulate(const LossBatch& batch, const char* group) {
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (const auto& f : batch) {
    Tensor loss = f();
    const double v = loss.item();
    if (!std::isfinite(v)) throw Error(std::string("bilevel_step: non-finite loss in the ") + group + " step");
    total += v;
    mul_scalar(loss, scale).backward();
  }
  return total * scale;
}

void set_trainable(const std::vector<Tensor>& ts, bool on) {
  for (Tensor t : ts) t.set_requires_grad(on);
}

}  // namespace

StepLosses bilevel_step(BilevelState& st, const LossBatch& train_batch, const LossBatch& val_batch) {
  if (train_batch.empty() || val_batch.empty()) throw Error("bilevel_step: empty batch");
  StepLosses out;
  if (!st.alphas.empty()) {
    set_trainable(st.weights, false);
    zero_grads(st.alphas);
    try {
      out.val_loss = accumulate(val_batch, "architecture-parameter");
    } catch (...) {
      set_trainable(st.weights, true);
      throw;
    }
    set_trainable(st.weights, true);
    st.a_opt.step(st.alphas);
  }
  set_trainable(st.alphas, false);
  zero_grads(st.weights);
  try {
    out.train_loss = accumulate(train_batch, "weight");
  } catch (...) {
    set_trainable(st.alphas, true);
    throw;
  }
  set_trainable(st.alphas, true);
  st.w_opt.step(st.weights);
  return out;
}

std::vector<double> link_probs(const Link& l) {
  if (!l.is_mixture() || !l.alpha.defined()) throw Error("link_probs: not a mixture link");
  const auto a = l.alpha.data();
  const double mx = *std::max_element(a.begin(), a.end());
  std::vector<double> p(a.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += p[k] = std::exp(a[k] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

namespace {

int argmax(const std::vector<double>& p, bool skip_zero) {
  int best = -1;
  for (int k = 0; k < static_cast<int>(p.size()); ++k) {
    if (skip_zero && k == kZeroOp) continue;
    if (best < 0 || p[k] > p[best]) best = k;
  }
  return best;
}

void fix_link(Link& l, int op) {
  for (int k = 0; k < kNumOps; ++k)
    if (k != op) l.params[k].reset();
  l.op = op;
  l.alpha = {};
}

// Drops the mixtures into vertices that already have two fixed links.
std::vector<std::string> prune_complete(ArchDag& arch, Space s) {
  std::map<int, int> fixed;
  for (const Link& l : arch.links(s))
    if (!l.is_mixture()) ++fixed[l.dst];
  std::vector<std::string> pruned;
  auto& links = arch.links(s);
  std::vector<Link> kept;
  for (Link& l : links) {
    if (l.is_mixture() && fixed[l.dst] >= 2) pruned.push_back(link_id(s, l));
    else kept.push_back(std::move(l));
  }
  links = std::move(kept);
  return pruned;
}

std::vector<Space> active_spaces(const ArchDag& arch) {
  if (arch.relation_space) return {Space::kNode, Space::kRelation};
  return {Space::kNode};
}

bool before(const Link& a, const Link& b) {
  return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
}

}  // namespace

Decision sgas_lite_decide(ArchDag& arch) {
  Decision d;
  for (Space s : active_spaces(arch)) {
    Link* best = nullptr;
    double best_p = -1.0;
    for (Link& l : arch.links(s)) {
      if (!l.is_mixture()) continue;
      const auto p = link_probs(l);
      const double peak = *std::max_element(p.begin(), p.end());
      if (best == nullptr || peak > best_p || (peak == best_p && before(l, *best))) {
        best = &l;
        best_p = peak;
      }
    }
    if (best == nullptr) continue;
    fix_link(*best, argmax(link_probs(*best), false));
    d.frozen.push_back(link_id(s, *best));
    auto pruned = prune_complete(arch, s);
    d.pruned.insert(d.pruned.end(), pruned.begin(), pruned.end());
  }
  return d;
}

namespace {

// Applies `choose` to every vertex with mixtures: it receives the vertex's
// mixtures (sorted by (src, dst)) and how many to keep, and returns the
// (index into that list, op) pairs to fix.
template <typename Choose>
ArchDag resolve(const ArchDag& arch, Choose choose) {
  ArchDag out = arch;
  for (Space s : active_spaces(arch)) {
    auto& links = out.links(s);
    std::vector<Link> result;
    for (int v : out.order) {
      int fixed = 0;
      std::vector<Link> mix;
      for (const Link& l : links) {
        if (l.dst != v) continue;
        if (l.is_mixture()) mix.push_back(l);
        else ++fixed;
      }
      if (mix.empty()) continue;
      std::sort(mix.begin(), mix.end(), before);
      const int keep = std::max(0, 2 - fixed);
      for (auto [i, op] : choose(mix, keep)) {
        fix_link(mix[i], op);
        result.push_back(std::move(mix[i]));
      }
    }
    // Fixed links keep their positions; resolved mixtures follow in vertex order.
    std::vector<Link> merged;
    for (Link& l : links)
      if (!l.is_mixture()) merged.push_back(std::move(l));
    for (Link& l : result) merged.push_back(std::move(l));
    links = std::move(merged);
  }
  validate(out);
  return out;
}

}  // namespace

ArchDag discretize(const ArchDag& arch) {
  return resolve(arch, [](const std::vector<Link>& mix, int keep) {
    std::vector<std::size_t> idx(mix.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> score(mix.size());
    for (std::size_t i = 0; i < mix.size(); ++i) {
      const auto p = link_probs(mix[i]);
      score[i] = p[argmax(p, true)];
    }
    // Stable: equal scores keep the (src, dst) order.
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return score[a] > score[b]; });
    std::vector<std::pair<std::size_t, int>> picks;
    for (int k = 0; k < keep && k < static_cast<int>(idx.size()); ++k)
      picks.emplace_back(idx[k], argmax(link_probs(mix[idx[k]]), false));
    std::sort(picks.begin(), picks.end());
    return picks;
  });
}

ArchDag random_strategy(const ArchDag& arch, std::uint64_t seed) {
  Rng rng(seed);
  return resolve(arch, [&rng](const std::vector<Link>& mix, int keep) {
    std::vector<std::size_t> idx(mix.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Uniform subset of size keep via a partial Fisher-Yates shuffle.
    for (int k = 0; k < keep && k < static_cast<int>(idx.size()); ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, idx.size() - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    idx.resize(std::min<std::size_t>(idx.size(), keep));
    std::sort(idx.begin(), idx.end());
    std::vector<std::pair<std::size_t, int>> picks;
    std::uniform_int_distribution<int> op(0, kNumOps - 1);
    for (std::size_t i : idx) picks.emplace_back(i, op(rng));
    return picks;
  });
}

ArchDag differentiate(const ArchDag& supernet, const Dataset& d, const StrategyConfig& cfg,
                      std::uint64_t seed, int phase, const LogFn& log) {
  cfg.check();
  if (cfg.kind == StrategyKind::kRandom) {
    ArchDag out = random_strategy(supernet, seed);
    if (log)
      log(nlohmann::json({{"event", "search_epoch"}, {"phase", phase}, {"epoch", 0},
                          {"train_loss", nullptr}, {"val_loss", nullptr},
                          {"decided", std::vector<std::string>{"random"}}})
              .dump());
    return out;
  }
  if (d.train.empty() || d.val.empty())
    throw Error("differentiate: search-train and search-val splits must be non-empty");
  Rng init_rng(derive_seed(seed, 1));
  ArchDag arch = supernet;
  init_params(arch, init_rng);
  Network net(std::move(arch), spec_for(d), init_rng);
  BilevelState st(net.weights(), net.alphas(), cfg);
  Rng order_rng(derive_seed(seed, 2));
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs && net.arch().has_mixtures(); ++epoch) {
    st.w_opt.set_lr(cosine_lr(epoch, cfg.epochs, cfg.lr_w));
    std::vector<std::size_t> ti(d.train.size()), vi(d.val.size());
    std::iota(ti.begin(), ti.end(), 0);
    std::iota(vi.begin(), vi.end(), 0);
    std::shuffle(ti.begin(), ti.end(), order_rng);
    std::shuffle(vi.begin(), vi.end(), order_rng);
    const std::size_t n_val_batches = (vi.size() + bs - 1) / bs;
    double train_sum = 0.0, val_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0, b = 0; start < ti.size(); start += bs, ++b) {
      LossBatch tb, vb;
      for (std::size_t k = start; k < std::min(ti.size(), start + bs); ++k)
        tb.push_back([&net, &g = d.train[ti[k]]] { return net.loss(g, true); });
      const std::size_t vs = (b % n_val_batches) * bs;
      for (std::size_t k = vs; k < std::min(vi.size(), vs + bs); ++k)
        vb.push_back([&net, &g = d.val[vi[k]]] { return net.loss(g, true); });
      const StepLosses l = bilevel_step(st, tb, vb);
      train_sum += l.train_loss;
      val_sum += l.val_loss;
      ++steps;
    }
    Decision dec;
    const int done = epoch + 1;
    if (cfg.kind == StrategyKind::kSgasLite && done >= cfg.warmup_epochs &&
        (done - cfg.warmup_epochs) % cfg.decide_every == 0) {
      dec = sgas_lite_decide(net.arch());
      st.alphas = net.alphas();
    }
    if (log)
      log(nlohmann::json({{"event", "search_epoch"}, {"phase", phase}, {"epoch", epoch},
                          {"train_loss", train_sum / static_cast<double>(steps)},
                          {"val_loss", val_sum / static_cast<double>(steps)},
                          {"decided", dec.frozen}, {"pruned", dec.pruned}})
              .dump());
  }
  return discretize(net.arch());
}

}  // namespace relnas
