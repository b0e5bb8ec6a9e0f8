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

#ifndef RELNAS_KERNELS_HPP_
#define RELNAS_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

// Dense row-major kernels behind the autodiff primitives.
//
// Every kernel exists twice: an OpenMP version in `relnas::kernels` and a
// plain loop in `relnas::kernels::serial`. The parallel versions split work
// over output rows only, and each output element is accumulated in the same
// order as in the serial loop, so the two agree bit-for-bit for any thread
// count. The serial versions are kept as the test reference.
namespace relnas::kernels {

// Work below this many multiply-adds stays on the calling thread.
inline constexpr std::size_t kParallelGrain = 1 << 15;

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
// c[k x n] += a[m x k]^T * b[m x n]
void matmul_at_b_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t k,
                     std::size_t n);
// c[m x k] += a[m x n] * b[k x n]^T
void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t n,
                     std::size_t k);

// out[i, :] = src[index[i], :]
void gather_rows(std::span<const double> src, std::span<const int> index,
                 std::span<double> out, std::size_t d);

// Segment reductions over rows. `offsets`/`rows` is a CSR grouping of the
// value rows by segment (rows listed in increasing order inside each
// segment). Empty segments produce zero rows.
void segment_sum(std::span<const double> values, std::span<const int> offsets,
                 std::span<const int> rows, std::span<double> out,
                 std::size_t d);
// argmax receives, per output element, the value row that attained the max
// (first by index on ties), or -1 for empty segments.
void segment_max(std::span<const double> values, std::span<const int> offsets,
                 std::span<const int> rows, std::span<double> out,
                 std::span<int> argmax, std::size_t d);

void softmax_rows(std::span<const double> x, std::span<double> out,
                  std::size_t m, std::size_t n);

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t k,
                     std::size_t n);
void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t n,
                     std::size_t k);
void gather_rows(std::span<const double> src, std::span<const int> index,
                 std::span<double> out, std::size_t d);
// The serial reductions take raw segment ids instead of a CSR grouping.
void segment_sum(std::span<const double> values, std::span<const int> segment,
                 std::span<double> out, std::size_t num_segments,
                 std::size_t d);
void segment_max(std::span<const double> values, std::span<const int> segment,
                 std::span<double> out, std::span<int> argmax,
                 std::size_t num_segments, std::size_t d);
void softmax_rows(std::span<const double> x, std::span<double> out,
                  std::size_t m, std::size_t n);

}  // namespace serial
}  // namespace relnas::kernels

#endif  // RELNAS_KERNELS_HPP_
