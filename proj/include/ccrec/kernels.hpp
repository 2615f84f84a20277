// Copyright 2026 The ccrec Authors.
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

// Dense row-major kernels shared by the autodiff engine, the compressors and
// the benchmarks. Every kernel exists twice: a plain serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`. The
// unqualified names in `kernels` forward to the parallel versions.
//
// Parallel versions split work over output rows only, so each output element
// is produced by one thread in the same order as the serial loop. The NN/TN
// products and the gather kernels are therefore bit-identical to the serial
// reference; matmul_nt uses a SIMD reduction and may differ in the last ulps.

#ifndef CCREC_KERNELS_HPP_
#define CCREC_KERNELS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ccrec::kernels {

namespace serial {

// C[m×n] (+)= A[m×k] · B[k×n]
template <typename T>
void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// C[m×n] (+)= A[m×k] · B[n×k]ᵀ
template <typename T>
void matmul_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

// C[m×n] (+)= A[k×m]ᵀ · B[k×n]
template <typename T>
void matmul_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  for (std::size_t i = 0; i < m; ++i) {
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T api = a[p * m + i];
      const T* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

// out[r] = Σ_i books[i][codes[r][i]] for each requested row, summing books
// left to right. `codes` is |V|×M, `books` is M×K×N, `out` is rows×N.
template <typename T, typename Code>
void gather_sum_rows(std::span<const std::size_t> rows, const Code* codes,
                     std::size_t m_books, std::size_t k_words, std::size_t n_dim,
                     const T* books, T* out) {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const Code* code = codes + rows[r] * m_books;
    T* o = out + r * n_dim;
    const T* first = books + static_cast<std::size_t>(code[0]) * n_dim;
    for (std::size_t j = 0; j < n_dim; ++j) o[j] = first[j];
    for (std::size_t i = 1; i < m_books; ++i) {
      const T* w =
          books + (i * k_words + static_cast<std::size_t>(code[i])) * n_dim;
      for (std::size_t j = 0; j < n_dim; ++j) o[j] += w[j];
    }
  }
}

// Full-table variant of gather_sum_rows (rows 0..num_items-1).
template <typename T, typename Code>
void gather_sum_table(std::size_t num_items, const Code* codes,
                      std::size_t m_books, std::size_t k_words,
                      std::size_t n_dim, const T* books, T* out) {
  for (std::size_t r = 0; r < num_items; ++r) {
    const Code* code = codes + r * m_books;
    T* o = out + r * n_dim;
    const T* first = books + static_cast<std::size_t>(code[0]) * n_dim;
    for (std::size_t j = 0; j < n_dim; ++j) o[j] = first[j];
    for (std::size_t i = 1; i < m_books; ++i) {
      const T* w =
          books + (i * k_words + static_cast<std::size_t>(code[i])) * n_dim;
      for (std::size_t j = 0; j < n_dim; ++j) o[j] += w[j];
    }
  }
}

// Left semi-tensor product C[H×nQ] = A[H×nP] ⋉ B[P×Q]:
//   C[h, q·n + r] = Σ_i A[h, i·n + r] · B[i, q]
template <typename T>
void stp(std::size_t h_rows, std::size_t p_rows, std::size_t q_cols,
         std::size_t block, const T* a, const T* b, T* c) {
  const std::size_t a_cols = block * p_rows;
  const std::size_t c_cols = block * q_cols;
  for (std::size_t h = 0; h < h_rows; ++h) {
    T* ch = c + h * c_cols;
    for (std::size_t j = 0; j < c_cols; ++j) ch[j] = T(0);
    const T* ah = a + h * a_cols;
    for (std::size_t i = 0; i < p_rows; ++i) {
      const T* seg = ah + i * block;
      const T* bi = b + i * q_cols;
      for (std::size_t q = 0; q < q_cols; ++q) {
        const T w = bi[q];
        T* dst = ch + q * block;
        for (std::size_t r = 0; r < block; ++r) dst[r] += seg[r] * w;
      }
    }
  }
}

}  // namespace serial

namespace parallel {

template <typename T>
void matmul_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  const std::int64_t rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* bp = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

template <typename T>
void matmul_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  const std::int64_t rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const T* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* bj = b + j * k;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] = accumulate ? c[i * n + j] + acc : acc;
    }
  }
}

template <typename T>
void matmul_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
               const T* b, T* c, bool accumulate = false) {
  const std::int64_t rows = static_cast<std::int64_t>(m);
#pragma omp parallel for schedule(static) if (m * n * k > 32768)
  for (std::int64_t ii = 0; ii < rows; ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    T* ci = c + i * n;
    if (!accumulate)
      for (std::size_t j = 0; j < n; ++j) ci[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T api = a[p * m + i];
      const T* bp = b + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
}

template <typename T, typename Code>
void gather_sum_rows(std::span<const std::size_t> rows, const Code* codes,
                     std::size_t m_books, std::size_t k_words, std::size_t n_dim,
                     const T* books, T* out) {
  const std::int64_t count = static_cast<std::int64_t>(rows.size());
#pragma omp parallel for schedule(static) if (rows.size() > 256)
  for (std::int64_t rr = 0; rr < count; ++rr) {
    const std::size_t r = static_cast<std::size_t>(rr);
    const Code* code = codes + rows[r] * m_books;
    T* o = out + r * n_dim;
    const T* first = books + static_cast<std::size_t>(code[0]) * n_dim;
#pragma omp simd
    for (std::size_t j = 0; j < n_dim; ++j) o[j] = first[j];
    for (std::size_t i = 1; i < m_books; ++i) {
      const T* w =
          books + (i * k_words + static_cast<std::size_t>(code[i])) * n_dim;
#pragma omp simd
      for (std::size_t j = 0; j < n_dim; ++j) o[j] += w[j];
    }
  }
}

template <typename T, typename Code>
void gather_sum_table(std::size_t num_items, const Code* codes,
                      std::size_t m_books, std::size_t k_words,
                      std::size_t n_dim, const T* books, T* out) {
  const std::int64_t count = static_cast<std::int64_t>(num_items);
#pragma omp parallel for schedule(static) if (num_items > 256)
  for (std::int64_t rr = 0; rr < count; ++rr) {
    const std::size_t r = static_cast<std::size_t>(rr);
    const Code* code = codes + r * m_books;
    T* o = out + r * n_dim;
    const T* first = books + static_cast<std::size_t>(code[0]) * n_dim;
#pragma omp simd
    for (std::size_t j = 0; j < n_dim; ++j) o[j] = first[j];
    for (std::size_t i = 1; i < m_books; ++i) {
      const T* w =
          books + (i * k_words + static_cast<std::size_t>(code[i])) * n_dim;
#pragma omp simd
      for (std::size_t j = 0; j < n_dim; ++j) o[j] += w[j];
    }
  }
}

template <typename T>
void stp(std::size_t h_rows, std::size_t p_rows, std::size_t q_cols,
         std::size_t block, const T* a, const T* b, T* c) {
  const std::size_t a_cols = block * p_rows;
  const std::size_t c_cols = block * q_cols;
  const std::int64_t rows = static_cast<std::int64_t>(h_rows);
#pragma omp parallel for schedule(static) if (h_rows * p_rows * c_cols > 32768)
  for (std::int64_t hh = 0; hh < rows; ++hh) {
    const std::size_t h = static_cast<std::size_t>(hh);
    T* ch = c + h * c_cols;
    for (std::size_t j = 0; j < c_cols; ++j) ch[j] = T(0);
    const T* ah = a + h * a_cols;
    for (std::size_t i = 0; i < p_rows; ++i) {
      const T* seg = ah + i * block;
      const T* bi = b + i * q_cols;
      for (std::size_t q = 0; q < q_cols; ++q) {
        const T w = bi[q];
        T* dst = ch + q * block;
#pragma omp simd
        for (std::size_t r = 0; r < block; ++r) dst[r] += seg[r] * w;
      }
    }
  }
}

}  // namespace parallel

using parallel::gather_sum_rows;
using parallel::gather_sum_table;
using parallel::matmul_nn;
using parallel::matmul_nt;
using parallel::matmul_tn;
using parallel::stp;

// Current OpenMP team size (1 when built without OpenMP).
inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

}  // namespace ccrec::kernels

#endif  // CCREC_KERNELS_HPP_
