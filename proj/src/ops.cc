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

#include "relnas/ops.hpp"

#include <cmath>

namespace relnas {

std::string_view node_op_name(NodeOp op) {
  switch (op) {
    case NodeOp::kMean: return "V_MEAN";
    case NodeOp::kSum: return "V_SUM";
    case NodeOp::kMax: return "V_MAX";
    case NodeOp::kStd: return "V_STD";
    case NodeOp::kGem2: return "V_GEM2";
    case NodeOp::kGem3: return "V_GEM3";
    case NodeOp::kSkip: return "SKIP";
    case NodeOp::kZero: return "ZERO";
  }
  return "?";
}

std::string_view rel_op_name(RelOp op) {
  switch (op) {
    case RelOp::kSub: return "E_SUB";
    case RelOp::kGauss: return "E_GAUSS";
    case RelOp::kHad: return "E_HAD";
    case RelOp::kMax: return "E_MAX";
    case RelOp::kSum: return "E_SUM";
    case RelOp::kMean: return "E_MEAN";
    case RelOp::kSkip: return "SKIP";
    case RelOp::kZero: return "ZERO";
  }
  return "?";
}

namespace {

Tensor tile_rows(const std::vector<double>& row, std::size_t m) {
  std::vector<double> d;
  d.reserve(m * row.size());
  for (std::size_t i = 0; i < m; ++i) d.insert(d.end(), row.begin(), row.end());
  return Tensor({m, row.size()}, std::move(d));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

void check_inputs(const char* op, const Tensor& v, const Tensor& e, const Graph& g) {
  require(v.defined() && v.dim() == 2 && v.rows() == static_cast<std::size_t>(g.n),
          std::string(op) + ": node features must have one row per node");
  if (g.m > 0)
    require(e.defined() && e.dim() == 2 && e.rows() == static_cast<std::size_t>(g.m),
            std::string(op) + ": edge features must have one row per edge");
}

const FilmParams& need_params(const FilmParams* p, std::string_view op) {
  if (p == nullptr) throw Error(std::string(op) + ": missing FiLM parameters");
  return *p;
}

// 1 for nodes with at least one incoming edge; undefined when every node has one.
Tensor neighbour_mask(const Graph& g, std::size_t d) {
  bool all = true;
  for (int t = 0; t < g.n && all; ++t) all = g.in_degree(t) > 0;
  if (all) return {};
  std::vector<double> mask(static_cast<std::size_t>(g.n) * d, 0.0);
  for (int t = 0; t < g.n; ++t)
    if (g.in_degree(t) > 0)
      for (std::size_t j = 0; j < d; ++j) mask[t * d + j] = 1.0;
  return Tensor({static_cast<std::size_t>(g.n), d}, std::move(mask));
}

Tensor apply_mask(const Tensor& x, const Tensor& mask) {
  return mask.defined() ? mul(x, mask) : x;
}

Tensor gem(const Tensor& msgs, const Graph& g, double alpha, double eps) {
  Tensor mean_pow = segment_reduce(pow(msgs, alpha), g.by_target, Reduce::kMean);
  return pow(add_scalar(relu(mean_pow), eps), 1.0 / alpha);
}

}  // namespace

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> d(fan_in * fan_out);
  for (auto& v : d) v = u(rng);
  return Tensor({fan_in, fan_out}, std::move(d), true);
}

FilmParams FilmParams::init(std::size_t d_in, std::size_t d_h, std::size_t d_out, Rng& rng) {
  FilmParams p;
  p.w1 = glorot_uniform(d_in, d_h, rng);
  p.w2 = glorot_uniform(d_h, d_h, rng);
  p.wk = glorot_uniform(d_h, d_out, rng);
  p.wb = glorot_uniform(d_h, d_out, rng);
  return p;
}

FilmParams FilmParams::forced(std::vector<double> gamma, std::vector<double> beta) {
  if (gamma.size() != beta.size() || gamma.empty())
    throw Error("FilmParams::forced: gamma and beta must be non-empty and equal length");
  FilmParams p;
  p.fixed = FixedAffine{std::move(gamma), std::move(beta)};
  return p;
}

std::vector<Tensor> FilmParams::tensors() const {
  if (fixed) return {};
  return {w1, w2, wk, wb};
}

std::size_t FilmParams::d_out() const {
  return fixed ? fixed->gamma.size() : wk.shape()[1];
}

std::pair<Tensor, Tensor> film_affine(const Tensor& cond, const FilmParams& p) {
  if (p.fixed) return {tile_rows(p.fixed->gamma, cond.rows()), tile_rows(p.fixed->beta, cond.rows())};
  if (!p.w1.defined()) throw Error("film_affine: parameters are not initialized");
  Tensor h = relu(matmul(relu(matmul(cond, p.w1)), p.w2));
  return {matmul(h, p.wk), matmul(h, p.wb)};
}

Tensor modulate_messages(const Tensor& v, const Tensor& e, const Graph& g, const FilmParams& p) {
  check_inputs("modulate_messages", v, e, g);
  require(g.m > 0, "modulate_messages: graph has no edges");
  auto [gamma, beta] = film_affine(e, p);
  require(gamma.cols() == v.cols(),
          "modulate_messages: FiLM width " + std::to_string(gamma.cols()) +
              " does not match node width " + std::to_string(v.cols()));
  return add(mul(gamma, gather_rows(v, g.edge_src)), beta);
}

Tensor node_op_forward(NodeOp kind, const Tensor& v, const Tensor& e, const Graph& g,
                       const FilmParams* p, const ZooConfig& cfg) {
  check_inputs("node_op_forward", v, e, g);
  switch (kind) {
    case NodeOp::kSkip:
      return v;
    case NodeOp::kZero:
      return Tensor::zeros(v.shape());
    default:
      break;
  }
  const auto& params = need_params(p, node_op_name(kind));
  if (g.m == 0) return Tensor::zeros(v.shape());
  Tensor msgs = modulate_messages(v, e, g, params);
  const std::size_t d = v.cols();
  switch (kind) {
    case NodeOp::kMean:
      return segment_reduce(msgs, g.by_target, Reduce::kMean);
    case NodeOp::kSum: {
      std::vector<double> deg(static_cast<std::size_t>(g.n) * d);
      for (int t = 0; t < g.n; ++t)
        for (std::size_t j = 0; j < d; ++j) deg[t * d + j] = g.in_degree(t);
      return mul(segment_reduce(msgs, g.by_target, Reduce::kMean),
                 Tensor({static_cast<std::size_t>(g.n), d}, std::move(deg)));
    }
    case NodeOp::kMax:
      return segment_reduce(msgs, g.by_target, Reduce::kMax);
    case NodeOp::kStd: {
      Tensor mu = segment_reduce(msgs, g.by_target, Reduce::kMean);
      Tensor mu2 = segment_reduce(pow(msgs, 2.0), g.by_target, Reduce::kMean);
      Tensor out = sqrt(add_scalar(relu(sub(mu2, pow(mu, 2.0))), cfg.eps));
      return apply_mask(out, neighbour_mask(g, d));
    }
    case NodeOp::kGem2:
      return apply_mask(gem(msgs, g, 2.0, cfg.eps), neighbour_mask(g, d));
    case NodeOp::kGem3:
      return apply_mask(gem(msgs, g, 3.0, cfg.eps), neighbour_mask(g, d));
    default:
      break;
  }
  throw Error("node_op_forward: unknown operation kind");
}

Tensor relation_function(RelOp kind, const Tensor& v, const Graph& g, const ZooConfig& cfg) {
  require(g.m > 0, "relation_function: graph has no edges");
  Tensor vs = gather_rows(v, g.edge_src);
  Tensor vt = gather_rows(v, g.edge_dst);
  switch (kind) {
    case RelOp::kSub:
      return sub(vs, vt);
    case RelOp::kGauss:
      return exp(mul_scalar(pow(sub(vs, vt), 2.0), -1.0 / (2.0 * cfg.gauss_sigma)));
    case RelOp::kHad:
      return mul(vs, vt);
    case RelOp::kMax:
      return maximum(vs, vt);
    case RelOp::kSum:
      return add(vs, vt);
    case RelOp::kMean:
      return mul_scalar(add(vs, vt), 0.5);
    default:
      break;
  }
  throw Error("relation_function: " + std::string(rel_op_name(kind)) + " has no pairwise function");
}

Tensor rel_op_forward(RelOp kind, const Tensor& v, const Tensor& e, const Graph& g,
                      const FilmParams* p, const ZooConfig& cfg) {
  check_inputs("rel_op_forward", v, e, g);
  require(g.m > 0, "rel_op_forward: graph has no edges");
  switch (kind) {
    case RelOp::kSkip:
      return e;
    case RelOp::kZero:
      return Tensor::zeros(e.shape());
    default:
      break;
  }
  const auto& params = need_params(p, rel_op_name(kind));
  auto [gamma, beta] = film_affine(relation_function(kind, v, g, cfg), params);
  require(gamma.cols() == e.cols(),
          "rel_op_forward: FiLM width " + std::to_string(gamma.cols()) +
              " does not match edge width " + std::to_string(e.cols()));
  return add(mul(gamma, e), beta);
}

}  // namespace relnas
