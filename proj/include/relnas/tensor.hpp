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

#ifndef RELNAS_TENSOR_HPP_
#define RELNAS_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relnas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

enum class Primitive {
  kLeaf,
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kAddRowVec,
  kMulScalar,
  kAddScalar,
  kRelu,
  kExp,
  kSqrt,
  kPow,
  kAbs,
  kMaximum,
  kConcatCols,
  kSoftmaxRows,
  kBatchNorm,
  kMeanRows,
  kSumAll,
  kMeanAll,
  kSegmentSum,
  kSegmentMean,
  kSegmentMax,
  kGatherRows,
  kSelect,
  kReshape,
  kCrossEntropy,
};

std::string_view primitive_name(Primitive p);

namespace detail {
struct Node;
}

// Dense row-major float64 tensor with optional reverse-mode gradient
// tracking. Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim() const { return shape().size(); }
  std::size_t numel() const;
  // Leading extent; 1 for scalars.
  std::size_t rows() const;
  // numel() / rows().
  std::size_t cols() const;

  std::span<const double> data() const;
  // Only leaves may be written (optimizers, finite differences, loaders).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t i, std::size_t j) const { return data()[i * cols() + j]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  // Empty span until a backward pass reaches this tensor.
  std::span<const double> grad() const;
  void zero_grad();

  Primitive kind() const;
  const void* id() const { return node_.get(); }

  // Same values, no history, no grad tracking.
  Tensor detach() const;
  // Deep copy of the values as a fresh leaf with the same requires_grad flag.
  Tensor clone() const;

  // Reverse pass from a one-element tensor. Accumulates d(this)/d(leaf) into
  // every reachable tensor that requires grad, then releases the history.
  void backward() const;

 private:
  friend struct TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Disables history recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Topologically ordered view of the history under a tensor; this is the order
// in which backward() visits primitives (reversed).
class Tape {
 public:
  struct Entry {
    Primitive kind;
    Shape shape;
    std::vector<const void*> inputs;
    const void* output;
  };
  static Tape of(const Tensor& root);
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

// Rows grouped by segment id. Built once per graph and shared by every
// segment reduction over the same edge set.
struct Segments {
  std::vector<int> ids;
  std::vector<int> offsets;  // size num_segments + 1
  std::vector<int> rows;     // value rows sorted by (segment, row)
  std::vector<int> counts;
  std::size_t num_segments = 0;

  static std::shared_ptr<const Segments> from_ids(std::vector<int> ids,
                                                  std::size_t num_segments);
};

using Index = std::shared_ptr<const std::vector<int>>;

enum class Reduce { kSum, kMean, kMax };

// ---- primitives -----------------------------------------------------------
// Elementwise binary ops require equal shapes, except that either operand
// may be a one-element tensor (scalar broadcast).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// a[m x n] + v[n] on every row.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_scalar(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// Subgradient 0 at 0.
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);
Tensor abs(const Tensor& a);
// Ties send the gradient to `a`.
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor concat_cols(std::span<const Tensor> parts);
// A 1-D input is treated as a single row.
Tensor softmax_rows(const Tensor& a);
// Mean over the leading axis: [m x n] -> [n].
Tensor mean_rows(const Tensor& a);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// values[e x d] reduced into [num_segments x d]; empty segments give zeros.
// kMax routes the gradient to the first attaining row.
Tensor segment_reduce(const Tensor& values, const std::shared_ptr<const Segments>& seg,
                      Reduce how);
Tensor gather_rows(const Tensor& a, const Index& index);
// Element k of the flattened tensor as a one-element tensor.
Tensor select(const Tensor& a, std::size_t k);
Tensor reshape(const Tensor& a, Shape shape);
// Mean softmax cross-entropy of logits[m x c] against integer labels.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

// Argument bundle for the generic entry point below.
struct PrimitiveArgs {
  double scalar = 0.0;  // exponent for kPow, constant for k{Mul,Add}Scalar
  std::shared_ptr<const Segments> segments;
  Index index;
  std::size_t position = 0;
  Shape shape;
  std::vector<int> labels;
};

Tensor apply_primitive(Primitive kind, std::span<const Tensor> inputs,
                       const PrimitiveArgs& args = {});

// Feature-wise batch normalization over rows with learnable affine terms.
// Training mode normalizes with batch statistics (biased variance) and
// updates the running estimates; eval mode uses the running estimates.
class BatchNorm {
 public:
  explicit BatchNorm(std::size_t features, double eps = 1e-5,
                     double momentum = 0.1);

  Tensor forward(const Tensor& x, bool training);

  std::size_t features() const { return features_; }
  Tensor& weight() { return weight_; }
  Tensor& bias() { return bias_; }
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }

 private:
  std::size_t features_;
  double eps_;
  double momentum_;
  Tensor weight_;
  Tensor bias_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for a scalar-valued f. The first form differentiates with respect to the
// argument; the second perturbs `param` in place (restored afterwards), for
// functions that close over their parameters.
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double eps);
double finite_diff_check(const std::function<Tensor()>& f, Tensor param,
                         double eps);

}  // namespace relnas

#endif  // RELNAS_TENSOR_HPP_
