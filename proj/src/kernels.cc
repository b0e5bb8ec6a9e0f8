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

#include "relnas/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace relnas::kernels {

namespace {

bool go_parallel(std::size_t work) { return work >= kParallelGrain; }

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t i = 0; i < rows; ++i) {
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    const double* ai = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t k,
                     std::size_t n) {
  const auto rows = static_cast<std::int64_t>(k);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t kk = 0; kk < rows; ++kk) {
    double* ck = c.data() + kk * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = a[i * k + kk];
      const double* bi = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ck[j] += av * bi[j];
    }
  }
}

void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t n,
                     std::size_t k) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m * k * n))
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* ai = a.data() + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* bk = b.data() + kk * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bk[j];
      c[i * k + kk] += s;
    }
  }
}

void gather_rows(std::span<const double> src, std::span<const int> index,
                 std::span<double> out, std::size_t d) {
  const auto rows = static_cast<std::int64_t>(index.size());
#pragma omp parallel for schedule(static) if (go_parallel(index.size() * d * 8))
  for (std::int64_t i = 0; i < rows; ++i) {
    std::copy_n(src.data() + static_cast<std::size_t>(index[i]) * d, d,
                out.data() + i * d);
  }
}

void segment_sum(std::span<const double> values, std::span<const int> offsets,
                 std::span<const int> rows, std::span<double> out,
                 std::size_t d) {
  const auto segs = static_cast<std::int64_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (go_parallel(rows.size() * d * 8))
  for (std::int64_t s = 0; s < segs; ++s) {
    double* os = out.data() + s * d;
    std::fill(os, os + d, 0.0);
    for (int e = offsets[s]; e < offsets[s + 1]; ++e) {
      const double* v = values.data() + static_cast<std::size_t>(rows[e]) * d;
      for (std::size_t j = 0; j < d; ++j) os[j] += v[j];
    }
  }
}

void segment_max(std::span<const double> values, std::span<const int> offsets,
                 std::span<const int> rows, std::span<double> out,
                 std::span<int> argmax, std::size_t d) {
  const auto segs = static_cast<std::int64_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (go_parallel(rows.size() * d * 8))
  for (std::int64_t s = 0; s < segs; ++s) {
    double* os = out.data() + s * d;
    int* as = argmax.data() + s * d;
    std::fill(os, os + d, 0.0);
    std::fill(as, as + d, -1);
    for (int e = offsets[s]; e < offsets[s + 1]; ++e) {
      const int r = rows[e];
      const double* v = values.data() + static_cast<std::size_t>(r) * d;
      for (std::size_t j = 0; j < d; ++j) {
        if (as[j] < 0 || v[j] > os[j]) {
          os[j] = v[j];
          as[j] = r;
        }
      }
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> out,
                  std::size_t m, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (go_parallel(m * n * 16))
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* xi = x.data() + i * n;
    double* oi = out.data() + i * n;
    const double mx = *std::max_element(xi, xi + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      oi[j] = std::exp(xi[j] - mx);
      z += oi[j];
    }
    for (std::size_t j = 0; j < n; ++j) oi[j] /= z;
  }
}

namespace serial {

void matmul(std::span<const double> a, std::span<const double> b,
            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c.begin(), c.begin() + m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) c[i * n + j] += a[i * k + p] * b[p * n + j];
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t k,
                     std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk)
      for (std::size_t j = 0; j < n; ++j) c[kk * n + j] += a[i * k + kk] * b[i * n + j];
}

void matmul_a_bt_acc(std::span<const double> a, std::span<const double> b,
                     std::span<double> c, std::size_t m, std::size_t n,
                     std::size_t k) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t kk = 0; kk < k; ++kk) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[kk * n + j];
      c[i * k + kk] += s;
    }
}

void gather_rows(std::span<const double> src, std::span<const int> index,
                 std::span<double> out, std::size_t d) {
  for (std::size_t i = 0; i < index.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      out[i * d + j] = src[static_cast<std::size_t>(index[i]) * d + j];
}

void segment_sum(std::span<const double> values, std::span<const int> segment,
                 std::span<double> out, std::size_t num_segments,
                 std::size_t d) {
  std::fill(out.begin(), out.begin() + num_segments * d, 0.0);
  for (std::size_t r = 0; r < segment.size(); ++r)
    for (std::size_t j = 0; j < d; ++j)
      out[static_cast<std::size_t>(segment[r]) * d + j] += values[r * d + j];
}

void segment_max(std::span<const double> values, std::span<const int> segment,
                 std::span<double> out, std::span<int> argmax,
                 std::size_t num_segments, std::size_t d) {
  std::fill(out.begin(), out.begin() + num_segments * d, 0.0);
  std::fill(argmax.begin(), argmax.begin() + num_segments * d, -1);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    const auto s = static_cast<std::size_t>(segment[r]);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = values[r * d + j];
      if (argmax[s * d + j] < 0 || v > out[s * d + j]) {
        out[s * d + j] = v;
        argmax[s * d + j] = static_cast<int>(r);
      }
    }
  }
}

void softmax_rows(std::span<const double> x, std::span<double> out,
                  std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) mx = std::max(mx, x[i * n + j]);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[i * n + j] = std::exp(x[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
}

}  // namespace serial
}  // namespace relnas::kernels
