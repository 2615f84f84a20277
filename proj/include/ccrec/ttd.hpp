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

// Tensor-train (TT) and semi-tensor-product tensor-train (STTD) factorized
// embedding tables, used as the comparison compressor.
//
// Conventions:
//  * Row index i is split mixed-radix, row-major: i = ((i1·I2 + i2)·I3 + …) + id.
//  * Output coordinates (j1..jd) are laid out row-major into the N-vector.
//  * Every core is stored as a matrix with i_k as its row index, so the slice
//    for coordinate i_k is one contiguous row:
//      TT    core k: [i_k][r_{k-1}][j_k][r_k]
//      STTD  first : [i_1][j_1][r]            slice J1 × R
//            middle: [i_k][p][j'][r]          slice (R/n) × (J_k/n · R)
//            last  : [i_d][p][j']             slice (R/n) × (J_d/n)
//  * An STP output block of width n expands one coordinate:
//    j_k = j'·n + r where r is the position inside the block.

#ifndef CCREC_TTD_HPP_
#define CCREC_TTD_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ccrec/checkpoint.hpp"
#include "ccrec/tensor.hpp"
#include "json.hpp"

namespace ccrec::ttd {

struct TTConfig {
  std::vector<std::size_t> row_factors;  // I_1..I_d, product >= |V|
  std::vector<std::size_t> col_factors;  // J_1..J_d, product == N
  std::size_t rank = 1;                  // R
  std::size_t block = 1;                 // STP factor n, divides R

  std::size_t chain_length() const { return row_factors.size(); }
  std::size_t padded_rows() const;  // Π I_k
  std::size_t dim() const;          // Π J_k

  // Shape checks for an STTD chain; throws ParameterError.
  void validate() const;
  void validate_for(std::size_t num_items, std::size_t embedding_dim) const;

  nlohmann::json to_json() const;
  static TTConfig from_json(const nlohmann::json& j);
};

// Picks d near-equal row factors with product >= num_items.
std::vector<std::size_t> balanced_row_factors(std::size_t num_items,
                                              std::size_t d);

// Splits `dim` into d ascending factors with product exactly `dim`, as equal
// as its prime factors allow.
std::vector<std::size_t> balanced_col_factors(std::size_t dim, std::size_t d);

std::vector<std::size_t> index_factorize(std::size_t i,
                                         std::span<const std::size_t> radices);
std::size_t index_compose(std::span<const std::size_t> digits,
                          std::span<const std::size_t> radices);

// ---- semi-tensor product --------------------------------------------------

// A[H×nP] ⋉ B[P×Q] -> C[H×nQ] with C[h, q·n + r] = Σ_i A[h, i·n + r]·B[i, q].
// Differentiable; ShapeError (DimensionError) when A's width != n·rows(B).
ad::Tensor stp(const ad::Tensor& a, const ad::Tensor& b, std::size_t n);

// Regroups an H × (J'·R·n) STP result, columns ordered (j', r_out, r), into a
// (H·J'·n) × R matrix with rows (h, j'·n + r). Differentiable permutation.
ad::Tensor unfold_blocks(const ad::Tensor& c, std::size_t j_blocks,
                         std::size_t rank, std::size_t n);

// ---- standard TT -------------------------------------------------------------

struct TTCores {
  TTConfig config;  // block is ignored (n = 1)
  std::vector<ad::Tensor> cores;

  static TTCores random(const TTConfig& config, double stddev,
                        std::mt19937_64& rng);
};

std::vector<double> tt_gather_row(std::size_t i, const TTCores& cores);

// ---- STTD ------------------------------------------------------------------------

struct STTDCores {
  TTConfig config;
  std::vector<ad::Tensor> cores;

  static STTDCores uniform(const TTConfig& config, double half_width,
                           std::mt19937_64& rng);
  static STTDCores zeros(const TTConfig& config);

  std::size_t parameter_count() const;
  ParamList named() const;
  static STTDCores from_checkpoint(const Checkpoint& ck);
};

// Shape (rows, cols) of the slice matrix of core k.
std::pair<std::size_t, std::size_t> slice_shape(const TTConfig& c,
                                                std::size_t k);

std::vector<double> sttd_gather_row(std::size_t i, const STTDCores& cores);

// Differentiable reconstruction of the requested rows (rows × N).
ad::Tensor sttd_rows(const STTDCores& cores, std::span<const std::size_t> rows);

// Compression rate as printed: Π I_k J_k over
//   I1J1R + Σ_{k=1}^{d-1} I_kJ_k R²/n² + I_dJ_d R/n².
// With `exclude_first_from_sum` the sum runs over k = 2..d-1 instead.
double sttd_rate(const TTConfig& c, bool exclude_first_from_sum = false);

struct FitOptions {
  std::size_t steps = 0;        // optimizer step budget
  std::size_t batch_rows = 256; // rows per step; all rows when fewer
  double lr = 0.01;
  std::uint64_t seed = 0;
};

// Fits STTD cores to `table` (|V| × N row-major) by Adam on mean squared row
// error. Virtual rows beyond |V| target zero. steps == 0 returns the seeded
// initialization.
STTDCores fit_cores(std::span<const double> table, std::size_t num_items,
                    const TTConfig& config, const FitOptions& options,
                    double* final_mse = nullptr);

// Frozen single-precision cores for the inference path.
struct FrozenSTTD {
  TTConfig config;
  std::vector<std::vector<float>> cores;  // same layout as STTDCores

  static FrozenSTTD freeze(const STTDCores& c);

  // Reconstructs rows into out (rows.size() × N). Scratch buffers are
  // per-call, so concurrent callers are safe.
  void reconstruct_rows(std::span<const std::size_t> rows, float* out) const;
  void reconstruct_rows_serial(std::span<const std::size_t> rows,
                               float* out) const;
  std::size_t parameter_count() const;
};

}  // namespace ccrec::ttd

#endif  // CCREC_TTD_HPP_
