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

#include "relnas/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "relnas/kernels.hpp"

namespace relnas {

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  Primitive kind = Primitive::kLeaf;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;
};

}  // namespace detail

using detail::Node;

struct TensorAccess {
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
};

namespace {

thread_local bool g_grad_enabled = true;

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

Node& node_of(const Tensor& t) {
  if (!t.defined()) throw Error("use of an undefined tensor");
  return *TensorAccess::node(t);
}

// Gradient buffer of an input, allocated on first use.
std::vector<double>& gbuf(Node& n) {
  if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
  return n.grad;
}

using BackwardFn = std::function<void(Node&)>;

Tensor make_op(Primitive kind, Shape shape, std::vector<double> data,
               std::initializer_list<Tensor> inputs, BackwardFn fn) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  out->kind = kind;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) track = track || node_of(t).requires_grad;
  }
  if (track) {
    out->requires_grad = true;
    for (const auto& t : inputs) out->inputs.push_back(TensorAccess::node(t));
    out->backward = std::move(fn);
  }
  return TensorAccess::wrap(std::move(out));
}

Tensor make_op(Primitive kind, Shape shape, std::vector<double> data,
               const std::vector<Tensor>& inputs, BackwardFn fn) {
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->data = std::move(data);
  out->kind = kind;
  bool track = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) track = track || node_of(t).requires_grad;
  }
  if (track) {
    out->requires_grad = true;
    for (const auto& t : inputs) out->inputs.push_back(TensorAccess::node(t));
    out->backward = std::move(fn);
  }
  return TensorAccess::wrap(std::move(out));
}

[[noreturn]] void shape_error(Primitive p, const Shape& a, const Shape& b) {
  throw Error(std::string(primitive_name(p)) + ": shape mismatch " +
              shape_str(a) + " vs " + shape_str(b));
}

void check_2d(Primitive p, const Tensor& t) {
  if (t.dim() != 2)
    throw Error(std::string(primitive_name(p)) + ": expected a 2-D tensor, got " +
                shape_str(t.shape()));
}

template <class F, class DA, class DB>
Tensor binary(Primitive kind, const Tensor& a, const Tensor& b, F f, DA da,
              DB db) {
  const auto& na = node_of(a);
  const auto& nb = node_of(b);
  const std::size_t sa = na.data.size();
  const std::size_t sb = nb.data.size();
  Shape shape;
  if (na.shape == nb.shape || sb == 1) {
    shape = na.shape;
  } else if (sa == 1) {
    shape = nb.shape;
  } else {
    shape_error(kind, na.shape, nb.shape);
  }
  const std::size_t n = std::max(sa, sb);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = f(na.data[sa == 1 ? 0 : i], nb.data[sb == 1 ? 0 : i]);
  return make_op(kind, std::move(shape), std::move(out), {a, b},
                 [da, db, sa, sb, n](Node& o) {
                   Node& x = *o.inputs[0];
                   Node& y = *o.inputs[1];
                   for (std::size_t i = 0; i < n; ++i) {
                     const double xv = x.data[sa == 1 ? 0 : i];
                     const double yv = y.data[sb == 1 ? 0 : i];
                     if (x.requires_grad) gbuf(x)[sa == 1 ? 0 : i] += o.grad[i] * da(xv, yv);
                     if (y.requires_grad) gbuf(y)[sb == 1 ? 0 : i] += o.grad[i] * db(xv, yv);
                   }
                 });
}

template <class F, class D>
Tensor unary(Primitive kind, const Tensor& a, F f, D d) {
  const auto& na = node_of(a);
  std::vector<double> out(na.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(na.data[i]);
  return make_op(kind, na.shape, std::move(out), {a}, [d](Node& o) {
    Node& x = *o.inputs[0];
    auto& g = gbuf(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * d(x.data[i], o.data[i]);
  });
}

std::vector<std::shared_ptr<Node>> topo_order(const std::shared_ptr<Node>& root) {
  std::vector<std::shared_ptr<Node>> order;
  std::unordered_set<const Node*> seen;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      auto child = n->inputs[next++];
      if (seen.insert(child.get()).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;
}

}  // namespace

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? " x " : "") << s[i];
  os << ']';
  return os.str();
}

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::kLeaf: return "leaf";
    case Primitive::kMatmul: return "matmul";
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kAddRowVec: return "add_rowvec";
    case Primitive::kMulScalar: return "mul_scalar";
    case Primitive::kAddScalar: return "add_scalar";
    case Primitive::kRelu: return "relu";
    case Primitive::kExp: return "exp";
    case Primitive::kSqrt: return "sqrt";
    case Primitive::kPow: return "pow";
    case Primitive::kAbs: return "abs";
    case Primitive::kMaximum: return "maximum";
    case Primitive::kConcatCols: return "concat_cols";
    case Primitive::kSoftmaxRows: return "softmax_rows";
    case Primitive::kBatchNorm: return "batch_norm";
    case Primitive::kMeanRows: return "mean_rows";
    case Primitive::kSumAll: return "sum_all";
    case Primitive::kMeanAll: return "mean_all";
    case Primitive::kSegmentSum: return "segment_sum";
    case Primitive::kSegmentMean: return "segment_mean";
    case Primitive::kSegmentMax: return "segment_max";
    case Primitive::kGatherRows: return "gather_rows";
    case Primitive::kSelect: return "select";
    case Primitive::kReshape: return "reshape";
    case Primitive::kCrossEntropy: return "cross_entropy";
  }
  return "unknown";
}

// ---- Tensor ----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw Error("tensor shape must have at least one extent");
  for (auto e : shape)
    if (e == 0) throw Error("tensor extents must be positive: " + shape_str(shape));
  if (product(shape) != data.size())
    throw Error("tensor data length " + std::to_string(data.size()) +
                " does not match shape " + shape_str(shape));
  node_ = std::make_shared<Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(data);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return node_of(*this).shape; }
std::size_t Tensor::numel() const { return node_of(*this).data.size(); }
std::size_t Tensor::rows() const { return shape().size() < 2 ? (dim() == 1 ? shape()[0] : 1) : shape()[0]; }
std::size_t Tensor::cols() const { return numel() / rows(); }

std::span<const double> Tensor::data() const { return node_of(*this).data; }

std::span<double> Tensor::mutable_data() {
  auto& n = node_of(*this);
  if (n.kind != Primitive::kLeaf) throw Error("mutable_data on a non-leaf tensor");
  return n.data;
}

double Tensor::item() const {
  if (numel() != 1) throw Error("item() on tensor of shape " + shape_str(shape()));
  return data()[0];
}

bool Tensor::requires_grad() const { return node_of(*this).requires_grad; }
void Tensor::set_requires_grad(bool on) { node_of(*this).requires_grad = on; }
bool Tensor::has_grad() const { return !node_of(*this).grad.empty(); }
std::span<const double> Tensor::grad() const { return node_of(*this).grad; }
void Tensor::zero_grad() { node_of(*this).grad.clear(); }
Primitive Tensor::kind() const { return node_of(*this).kind; }

Tensor Tensor::detach() const { return Tensor(shape(), node_of(*this).data, false); }

Tensor Tensor::clone() const {
  return Tensor(shape(), node_of(*this).data, requires_grad());
}

void Tensor::backward() const {
  auto& root = TensorAccess::node(*this);
  if (!root) throw Error("backward on an undefined tensor");
  if (root->data.size() != 1)
    throw Error("backward: loss must have exactly one element, got shape " +
                shape_str(root->shape));
  if (!root->requires_grad) return;
  auto order = topo_order(root);
  gbuf(*root)[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
  for (auto& n : order) {
    if (n->kind != Primitive::kLeaf) {
      n->backward = nullptr;
      n->inputs.clear();
    }
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Tape Tape::of(const Tensor& root) {
  Tape tape;
  for (const auto& n : topo_order(TensorAccess::node(root))) {
    if (n->kind == Primitive::kLeaf) continue;
    Entry e{n->kind, n->shape, {}, n.get()};
    for (const auto& in : n->inputs) e.inputs.push_back(in.get());
    tape.entries_.push_back(std::move(e));
  }
  return tape;
}

std::shared_ptr<const Segments> Segments::from_ids(std::vector<int> ids,
                                                   std::size_t num_segments) {
  auto s = std::make_shared<Segments>();
  s->num_segments = num_segments;
  s->counts.assign(num_segments, 0);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= num_segments)
      throw Error("segment_reduce: unknown segment id " + std::to_string(ids[r]) +
                  " at row " + std::to_string(r) + " (num_segments " +
                  std::to_string(num_segments) + ")");
    ++s->counts[ids[r]];
  }
  s->offsets.assign(num_segments + 1, 0);
  for (std::size_t i = 0; i < num_segments; ++i)
    s->offsets[i + 1] = s->offsets[i] + s->counts[i];
  s->rows.resize(ids.size());
  std::vector<int> fill(s->offsets.begin(), s->offsets.end() - 1);
  for (std::size_t r = 0; r < ids.size(); ++r) s->rows[fill[ids[r]]++] = static_cast<int>(r);
  s->ids = std::move(ids);
  return s;
}

// ---- primitives ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d(Primitive::kMatmul, a);
  check_2d(Primitive::kMatmul, b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_error(Primitive::kMatmul, a.shape(), b.shape());
  std::vector<double> out(m * n);
  kernels::matmul(a.data(), b.data(), out, m, k, n);
  return make_op(Primitive::kMatmul, {m, n}, std::move(out), {a, b},
                 [m, k, n](Node& o) {
                   Node& x = *o.inputs[0];
                   Node& y = *o.inputs[1];
                   if (x.requires_grad) kernels::matmul_a_bt_acc(o.grad, y.data, gbuf(x), m, n, k);
                   if (y.requires_grad) kernels::matmul_at_b_acc(x.data, o.grad, gbuf(y), m, k, n);
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      Primitive::kAdd, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      Primitive::kSub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      Primitive::kMul, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      Primitive::kMaximum, a, b, [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
  const std::size_t m = a.rows(), n = a.cols();
  if (v.numel() != n) shape_error(Primitive::kAddRowVec, a.shape(), v.shape());
  std::vector<double> out(a.data().begin(), a.data().end());
  const auto vd = v.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += vd[j];
  return make_op(Primitive::kAddRowVec, a.shape(), std::move(out), {a, v},
                 [m, n](Node& o) {
                   Node& x = *o.inputs[0];
                   Node& y = *o.inputs[1];
                   if (x.requires_grad) {
                     auto& g = gbuf(x);
                     for (std::size_t i = 0; i < m * n; ++i) g[i] += o.grad[i];
                   }
                   if (y.requires_grad) {
                     auto& g = gbuf(y);
                     for (std::size_t i = 0; i < m; ++i)
                       for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
                   }
                 });
}

Tensor mul_scalar(const Tensor& a, double c) {
  return unary(
      Primitive::kMulScalar, a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(
      Primitive::kAddScalar, a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary(
      Primitive::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary(
      Primitive::kExp, a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
  return unary(
      Primitive::kSqrt, a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor pow(const Tensor& a, double exponent) {
  // Small integer powers avoid libm; they are the hot path of V_STD and GeM.
  if (exponent == 2.0)
    return unary(
        Primitive::kPow, a, [](double x) { return x * x; },
        [](double x, double) { return 2.0 * x; });
  if (exponent == 3.0)
    return unary(
        Primitive::kPow, a, [](double x) { return x * x * x; },
        [](double x, double) { return 3.0 * x * x; });
  return unary(
      Primitive::kPow, a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

Tensor abs(const Tensor& a) {
  return unary(
      Primitive::kAbs, a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const std::size_t m = parts[0].rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) shape_error(Primitive::kConcatCols, parts[0].shape(), p.shape());
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(m * total);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto d = parts[k].data();
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(d.data() + i * widths[k], widths[k], out.data() + i * total + off);
    off += widths[k];
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_op(Primitive::kConcatCols, {m, total}, std::move(out), inputs,
                 [m, total, widths](Node& o) {
                   std::size_t off = 0;
                   for (std::size_t k = 0; k < o.inputs.size(); ++k) {
                     Node& x = *o.inputs[k];
                     if (x.requires_grad) {
                       auto& g = gbuf(x);
                       for (std::size_t i = 0; i < m; ++i)
                         for (std::size_t j = 0; j < widths[k]; ++j)
                           g[i * widths[k] + j] += o.grad[i * total + off + j];
                     }
                     off += widths[k];
                   }
                 });
}

Tensor softmax_rows(const Tensor& a) {
  const std::size_t m = a.dim() == 1 ? 1 : a.rows();
  const std::size_t n = a.numel() / m;
  std::vector<double> out(a.numel());
  kernels::softmax_rows(a.data(), out, m, n);
  return make_op(Primitive::kSoftmaxRows, a.shape(), std::move(out), {a},
                 [m, n](Node& o) {
                   Node& x = *o.inputs[0];
                   auto& g = gbuf(x);
                   for (std::size_t i = 0; i < m; ++i) {
                     double dot = 0.0;
                     for (std::size_t j = 0; j < n; ++j) dot += o.grad[i * n + j] * o.data[i * n + j];
                     for (std::size_t j = 0; j < n; ++j)
                       g[i * n + j] += o.data[i * n + j] * (o.grad[i * n + j] - dot);
                   }
                 });
}

Tensor mean_rows(const Tensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(n, 0.0);
  const auto d = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += d[i * n + j];
  for (auto& v : out) v /= static_cast<double>(m);
  return make_op(Primitive::kMeanRows, {n}, std::move(out), {a}, [m, n](Node& o) {
    auto& g = gbuf(*o.inputs[0]);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += o.grad[j] / static_cast<double>(m);
  });
}

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op(Primitive::kSumAll, {1}, {s}, {a}, [](Node& o) {
    auto& g = gbuf(*o.inputs[0]);
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.numel());
  return make_op(Primitive::kMeanAll, {1}, {s / n}, {a}, [n](Node& o) {
    auto& g = gbuf(*o.inputs[0]);
    for (auto& v : g) v += o.grad[0] / n;
  });
}

Tensor segment_reduce(const Tensor& values, const std::shared_ptr<const Segments>& seg,
                      Reduce how) {
  if (!seg) throw Error("segment_reduce: missing segment ids");
  const std::size_t e = values.rows(), d = values.cols();
  if (seg->ids.size() != e)
    throw Error("segment_reduce: " + std::to_string(seg->ids.size()) +
                " segment ids for values of shape " + shape_str(values.shape()));
  const std::size_t s = seg->num_segments;
  std::vector<double> out(s * d);
  if (how == Reduce::kMax) {
    auto arg = std::make_shared<std::vector<int>>(s * d);
    kernels::segment_max(values.data(), seg->offsets, seg->rows, out, *arg, d);
    return make_op(Primitive::kSegmentMax, {s, d}, std::move(out), {values},
                   [arg, s, d](Node& o) {
                     auto& g = gbuf(*o.inputs[0]);
                     for (std::size_t i = 0; i < s * d; ++i) {
                       const int r = (*arg)[i];
                       if (r >= 0) g[static_cast<std::size_t>(r) * d + i % d] += o.grad[i];
                     }
                   });
  }
  kernels::segment_sum(values.data(), seg->offsets, seg->rows, out, d);
  const bool mean = how == Reduce::kMean;
  if (mean) {
    for (std::size_t i = 0; i < s; ++i) {
      if (seg->counts[i] == 0) continue;
      const double c = seg->counts[i];
      for (std::size_t j = 0; j < d; ++j) out[i * d + j] /= c;
    }
  }
  return make_op(mean ? Primitive::kSegmentMean : Primitive::kSegmentSum, {s, d},
                 std::move(out), {values}, [seg, mean, d](Node& o) {
                   auto& g = gbuf(*o.inputs[0]);
                   for (std::size_t r = 0; r < seg->ids.size(); ++r) {
                     const auto si = static_cast<std::size_t>(seg->ids[r]);
                     const double scale = mean ? 1.0 / seg->counts[si] : 1.0;
                     for (std::size_t j = 0; j < d; ++j) g[r * d + j] += o.grad[si * d + j] * scale;
                   }
                 });
}

Tensor gather_rows(const Tensor& a, const Index& index) {
  if (!index) throw Error("gather_rows: missing index");
  const std::size_t n = a.rows(), d = a.cols();
  for (int i : *index)
    if (i < 0 || static_cast<std::size_t>(i) >= n)
      throw Error("gather_rows: row " + std::to_string(i) + " out of range for " +
                  shape_str(a.shape()));
  if (index->empty()) throw Error("gather_rows: empty index");
  std::vector<double> out(index->size() * d);
  kernels::gather_rows(a.data(), *index, out, d);
  return make_op(Primitive::kGatherRows, {index->size(), d}, std::move(out), {a},
                 [index, d](Node& o) {
                   auto& g = gbuf(*o.inputs[0]);
                   for (std::size_t i = 0; i < index->size(); ++i) {
                     const auto r = static_cast<std::size_t>((*index)[i]);
                     for (std::size_t j = 0; j < d; ++j) g[r * d + j] += o.grad[i * d + j];
                   }
                 });
}

Tensor select(const Tensor& a, std::size_t k) {
  if (k >= a.numel())
    throw Error("select: index " + std::to_string(k) + " out of range for " +
                shape_str(a.shape()));
  return make_op(Primitive::kSelect, {1}, {a.data()[k]}, {a}, [k](Node& o) {
    gbuf(*o.inputs[0])[k] += o.grad[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (product(shape) != a.numel()) shape_error(Primitive::kReshape, a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_op(Primitive::kReshape, std::move(shape), std::move(out), {a}, [](Node& o) {
    auto& g = gbuf(*o.inputs[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const std::size_t m = logits.dim() == 1 ? 1 : logits.rows();
  const std::size_t c = logits.numel() / m;
  if (labels.size() != m)
    throw Error("cross_entropy: " + std::to_string(labels.size()) +
                " labels for logits of shape " + shape_str(logits.shape()));
  auto probs = std::make_shared<std::vector<double>>(m * c);
  kernels::softmax_rows(logits.data(), *probs, m, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw Error("cross_entropy: label " + std::to_string(labels[i]) +
                  " out of range for " + std::to_string(c) + " classes");
    const auto d = logits.data();
    double mx = d[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, d[i * c + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(d[i * c + j] - mx);
    loss += mx + std::log(z) - d[i * c + labels[i]];
  }
  loss /= static_cast<double>(m);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_op(Primitive::kCrossEntropy, {1}, {loss}, {logits},
                 [probs, lab, m, c](Node& o) {
                   auto& g = gbuf(*o.inputs[0]);
                   const double s = o.grad[0] / static_cast<double>(m);
                   for (std::size_t i = 0; i < m; ++i)
                     for (std::size_t j = 0; j < c; ++j)
                       g[i * c + j] += s * ((*probs)[i * c + j] -
                                            (static_cast<int>(j) == lab[i] ? 1.0 : 0.0));
                 });
}

Tensor apply_primitive(Primitive kind, std::span<const Tensor> in,
                       const PrimitiveArgs& args) {
  auto need = [&](std::size_t k) {
    if (in.size() != k)
      throw Error(std::string(primitive_name(kind)) + ": expected " + std::to_string(k) +
                  " inputs, got " + std::to_string(in.size()));
  };
  switch (kind) {
    case Primitive::kMatmul: need(2); return matmul(in[0], in[1]);
    case Primitive::kAdd: need(2); return add(in[0], in[1]);
    case Primitive::kSub: need(2); return sub(in[0], in[1]);
    case Primitive::kMul: need(2); return mul(in[0], in[1]);
    case Primitive::kAddRowVec: need(2); return add_rowvec(in[0], in[1]);
    case Primitive::kMaximum: need(2); return maximum(in[0], in[1]);
    case Primitive::kMulScalar: need(1); return mul_scalar(in[0], args.scalar);
    case Primitive::kAddScalar: need(1); return add_scalar(in[0], args.scalar);
    case Primitive::kRelu: need(1); return relu(in[0]);
    case Primitive::kExp: need(1); return exp(in[0]);
    case Primitive::kSqrt: need(1); return sqrt(in[0]);
    case Primitive::kPow: need(1); return pow(in[0], args.scalar);
    case Primitive::kAbs: need(1); return abs(in[0]);
    case Primitive::kConcatCols: return concat_cols(in);
    case Primitive::kSoftmaxRows: need(1); return softmax_rows(in[0]);
    case Primitive::kMeanRows: need(1); return mean_rows(in[0]);
    case Primitive::kSumAll: need(1); return sum_all(in[0]);
    case Primitive::kMeanAll: need(1); return mean_all(in[0]);
    case Primitive::kSegmentSum: need(1); return segment_reduce(in[0], args.segments, Reduce::kSum);
    case Primitive::kSegmentMean: need(1); return segment_reduce(in[0], args.segments, Reduce::kMean);
    case Primitive::kSegmentMax: need(1); return segment_reduce(in[0], args.segments, Reduce::kMax);
    case Primitive::kGatherRows: need(1); return gather_rows(in[0], args.index);
    case Primitive::kSelect: need(1); return select(in[0], args.position);
    case Primitive::kReshape: need(1); return reshape(in[0], args.shape);
    case Primitive::kCrossEntropy: need(1); return cross_entropy(in[0], args.labels);
    case Primitive::kLeaf:
    case Primitive::kBatchNorm:
      break;
  }
  throw Error(std::string(primitive_name(kind)) + " cannot be applied directly");
}

// ---- BatchNorm --------------------------------------------------------------

BatchNorm::BatchNorm(std::size_t features, double eps, double momentum)
    : features_(features),
      eps_(eps),
      momentum_(momentum),
      weight_(Tensor::full({features}, 1.0, true)),
      bias_(Tensor::zeros({features}, true)),
      running_mean_(features, 0.0),
      running_var_(features, 1.0) {}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
  const std::size_t m = x.rows(), n = x.cols();
  if (n != features_)
    throw Error("batch_norm: expected " + std::to_string(features_) +
                " features, got shape " + shape_str(x.shape()));
  const auto xd = x.data();
  const auto w = weight_.data();
  const auto b = bias_.data();
  std::vector<double> mean(n, 0.0), inv_std(n, 0.0);
  if (training) {
    if (m < 2) throw Error("batch_norm: training mode needs at least 2 rows, got " +
                           std::to_string(m));
    std::vector<double> var(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) mean[j] += xd[i * n + j];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double c = xd[i * n + j] - mean[j];
        var[j] += c * c;
      }
    for (std::size_t j = 0; j < n; ++j) {
      var[j] /= static_cast<double>(m);
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps_);
      running_mean_[j] = (1.0 - momentum_) * running_mean_[j] + momentum_ * mean[j];
      running_var_[j] = (1.0 - momentum_) * running_var_[j] +
                        momentum_ * var[j] * static_cast<double>(m) / static_cast<double>(m - 1);
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) {
      mean[j] = running_mean_[j];
      inv_std[j] = 1.0 / std::sqrt(running_var_[j] + eps_);
    }
  }
  auto xhat = std::make_shared<std::vector<double>>(m * n);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xd[i * n + j] - mean[j]) * inv_std[j];
      (*xhat)[i * n + j] = h;
      out[i * n + j] = h * w[j] + b[j];
    }
  return make_op(
      Primitive::kBatchNorm, x.shape(), std::move(out), {x, weight_, bias_},
      [xhat, inv_std, training, m, n](Node& o) {
        Node& xn = *o.inputs[0];
        Node& wn = *o.inputs[1];
        Node& bn = *o.inputs[2];
        if (wn.requires_grad) {
          auto& g = gbuf(wn);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j] * (*xhat)[i * n + j];
        }
        if (bn.requires_grad) {
          auto& g = gbuf(bn);
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
        }
        if (!xn.requires_grad) return;
        auto& g = gbuf(xn);
        if (!training) {
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              g[i * n + j] += o.grad[i * n + j] * wn.data[j] * inv_std[j];
          return;
        }
        const double md = static_cast<double>(m);
        for (std::size_t j = 0; j < n; ++j) {
          double sum_d = 0.0, sum_dh = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            const double dh = o.grad[i * n + j] * wn.data[j];
            sum_d += dh;
            sum_dh += dh * (*xhat)[i * n + j];
          }
          for (std::size_t i = 0; i < m; ++i) {
            const double dh = o.grad[i * n + j] * wn.data[j];
            g[i * n + j] += inv_std[j] / md *
                            (md * dh - sum_d - (*xhat)[i * n + j] * sum_dh);
          }
        }
      });
}

// ---- finite differences -----------------------------------------------------

namespace {

double check_finite(double v) {
  if (!std::isfinite(v)) throw Error("finite_diff_check: non-finite function value");
  return v;
}

double compare(std::span<const double> analytic, std::span<const double> numeric) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double err = std::fabs(analytic[i] - numeric[i]) / std::max(1.0, std::fabs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double eps) {
  Tensor xc = x.clone();
  xc.set_requires_grad(true);
  return finite_diff_check([&] { return f(xc); }, xc, eps);
}

double finite_diff_check(const std::function<Tensor()>& f, Tensor param, double eps) {
  if (!(eps > 0.0)) throw Error("finite_diff_check: eps must be positive");
  const bool was = param.requires_grad();
  param.set_requires_grad(true);
  param.zero_grad();
  Tensor y = f();
  if (y.numel() != 1) throw Error("finite_diff_check: function must be scalar");
  check_finite(y.item());
  y.backward();
  std::vector<double> analytic(param.numel(), 0.0);
  if (param.has_grad()) std::copy(param.grad().begin(), param.grad().end(), analytic.begin());
  param.zero_grad();

  std::vector<double> numeric(param.numel());
  {
    NoGradGuard guard;
    auto d = param.mutable_data();
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double orig = d[i];
      d[i] = orig + eps;
      const double fp = check_finite(f().item());
      d[i] = orig - eps;
      const double fm = check_finite(f().item());
      d[i] = orig;
      numeric[i] = (fp - fm) / (2.0 * eps);
    }
  }
  param.set_requires_grad(was);
  return compare(analytic, numeric);
}

}  // namespace relnas
