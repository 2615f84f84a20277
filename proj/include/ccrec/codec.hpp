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

// Compositional codes: every item is a tuple of M codeword indices into M
// codebooks of K vectors each, and its embedding is the sum of the selected
// codewords.
//
// Training relaxes the discrete choice. A shared two-layer MLP maps the
// teacher embedding X_v to M groups of K scores,
//   h_v = tanh(X_v θ + b),  α_v = softmax_per_group(softplus(h_v θ' + b')),
// a Gumbel-Softmax with temperature ε turns α into soft one-hots O_v, and the
// soft embedding is Σ_i O_v^iᵀ E_i. Export takes the per-group argmax.
//
// Storage layout: the M codebooks are stacked into one MK × N matrix, book i
// occupying rows i·K .. i·K+K-1; soft codes are |V| × MK with the same
// grouping.

#ifndef CCREC_CODEC_HPP_
#define CCREC_CODEC_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "ccrec/checkpoint.hpp"
#include "ccrec/tensor.hpp"
#include "json.hpp"

namespace ccrec::codec {

struct CodecConfig {
  std::size_t m = 4;          // codebooks
  std::size_t k = 32;         // codewords per book, power of two
  std::size_t dim = 100;      // N
  double epsilon = 0.3;       // Gumbel temperature
  double eta = 0.8;           // mixup weight on the teacher embedding
  bool per_book_heads = false;
  double input_scale = 1.0;   // multiplies the code-MLP input

  std::size_t mk() const { return m * k; }
  std::size_t bits_per_code() const;  // log2 K
  void validate() const;
  nlohmann::json to_json() const;
  static CodecConfig from_json(const nlohmann::json& j);
};

struct CodeMLP {
  ad::Tensor theta;                // N × MK/2
  ad::Tensor bias;                 // 1 × MK/2
  std::vector<ad::Tensor> theta2;  // one MK/2 × MK matrix, or M of MK/2 × K
  std::vector<ad::Tensor> bias2;   // matching 1 × MK or 1 × K

  static CodeMLP create(const CodecConfig& c, std::mt19937_64& rng);
  static CodeMLP zeros(const CodecConfig& c);
  ParamList named(const std::string& prefix) const;
  std::vector<ad::Tensor> tensors() const;
};

struct Codebooks {
  ad::Tensor books;  // MK × N

  static Codebooks create(const CodecConfig& c, std::mt19937_64& rng);
};

// α for a batch of embeddings (B × N) -> B × MK, each group on the simplex.
ad::Tensor code_probs(const ad::Tensor& x, const CodeMLP& mlp,
                      const CodecConfig& c);

// O = softmax((log max(α, 1e-10) + G) / ε) per group. With rng == nullptr
// the noise is zero. Throws ParameterError for ε <= 0.
ad::Tensor gumbel_softmax(const ad::Tensor& alpha, std::size_t k, double epsilon,
                          std::mt19937_64* rng);

// One standard Gumbel draw -log(-log(U)), U uniform on (0, 1).
double gumbel_noise(std::mt19937_64& rng);

// Σ_i O^iᵀ E_i for soft codes O (B × MK).
ad::Tensor compose_soft(const ad::Tensor& soft_codes, const Codebooks& books);

struct CodeMatrix {
  std::size_t num_items = 0;
  std::size_t m = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> codes;  // num_items × m

  std::uint32_t at(std::size_t item, std::size_t book) const {
    return codes[item * m + book];
  }
  void validate() const;  // IndexError for a code >= K
};

// Σ_i E_i[C_v^i] for the requested items, summed left to right over books.
ad::Tensor compose_hard(const CodeMatrix& c, const Codebooks& books,
                        std::span<const std::size_t> items);

// η·X + (1-η)·e. Throws ParameterError unless 0 < η < 1.
ad::Tensor mixup(const ad::Tensor& composite, const ad::Tensor& x, double eta);

// Mean over rows of the squared row distance.
ad::Tensor mse_loss(const ad::Tensor& composite, const ad::Tensor& x);

// Per-group argmax of noise-free α; ties go to the smallest index.
CodeMatrix harden_codes(const CodeMLP& mlp, const ad::Tensor& x,
                        const CodecConfig& c);
std::vector<std::uint32_t> argmax_groups(std::span<const double> alpha,
                                         std::size_t k);

struct Ratio {
  std::uint64_t compressed = 0;  // M·K·N + M·|V|
  std::uint64_t original = 0;    // |V|·N
  double value = 0.0;            // original / compressed
  std::uint64_t floor = 0;
};

// Throws ParameterError on zero arguments.
Ratio compression_ratio(std::uint64_t num_items, std::uint64_t dim,
                        std::uint64_t m, std::uint64_t k);

// ---- training ---------------------------------------------------------------------

struct CodecModel {
  CodecConfig config;
  CodeMLP mlp;
  Codebooks books;

  static CodecModel create(const CodecConfig& c, std::mt19937_64& rng);
  // Same, fitted to the scale of `reference` (|V| × N): the input scale is set
  // to 1/rms(reference) and the codebooks are rescaled so a composite of
  // random codewords has the reference's rms.
  static CodecModel create_for(CodecConfig c, const ad::Tensor& reference,
                               std::mt19937_64& rng);
  ParamList named() const;
  std::vector<ad::Tensor> tensors() const;
  static CodecModel from_checkpoint(const Checkpoint& ck);

  // Soft composite for rows of x; gumbel noise drawn from rng when given.
  ad::Tensor soft_embeddings(const ad::Tensor& x, std::mt19937_64* rng) const;
};

struct CodecTrainOptions {
  std::size_t epochs = 200;
  std::size_t batch_size = 100;
  double lr = 0.001;
  double weight_decay = 0.0;
  bool noise = true;
  std::uint64_t seed = 0;
};

struct CodecTrainReport {
  double initial_mse = 0.0;  // full table before any update, same noise mode
  std::vector<double> epoch_mse;  // mean minibatch loss per epoch
  double final_mse = 0.0;         // full table after training, same noise mode
};

// Fits codes and codebooks to a fixed table by L_mse alone.
CodecTrainReport train_codec(CodecModel& model, const ad::Tensor& table,
                             const CodecTrainOptions& options);

// ---- frozen codes -----------------------------------------------------------------

struct FrozenCodec {
  CodeMatrix codes;
  std::size_t dim = 0;
  std::vector<float> books;  // MK × N

  static FrozenCodec freeze(const CodeMatrix& codes, const Codebooks& books);

  // rows.size() × N. IndexError for an item outside the code matrix.
  void reconstruct_rows(std::span<const std::size_t> rows, float* out) const;
  void reconstruct_rows_serial(std::span<const std::size_t> rows, float* out) const;
  void reconstruct_table(float* out) const;  // |V| × N
  void reconstruct_table_serial(float* out) const;

  // Codeword usage counts per book (M × K).
  std::vector<std::vector<std::uint64_t>> usage() const;
  std::size_t storage_bytes() const;  // packed codes + f32 books
};

// Packed binary format, little-endian:
//   "CCEC" | version u32 | |V| u64 | M u32 | K u32 | N u32 | dtype u8 (0=f32)
//   | codes: per item M codewords of log2 K bits, MSB first, padded to a byte
//   | books: M·K·N f32, row-major
std::vector<std::uint8_t> pack(const FrozenCodec& c);
FrozenCodec unpack(std::span<const std::uint8_t> bytes);
void save_packed(const std::filesystem::path& path, const FrozenCodec& c);
FrozenCodec load_packed(const std::filesystem::path& path);

inline constexpr std::size_t kPackedHeaderBytes = 29;
std::size_t packed_code_bytes_per_item(std::size_t m, std::size_t k);

// Human-readable summary: header fields, sizes, per-book usage statistics
// and the first `items` code tuples.
nlohmann::json inspect(const FrozenCodec& c, std::size_t items = 10);

// CSV rows "book,codeword,count".
std::string usage_csv(const FrozenCodec& c);

}  // namespace ccrec::codec

#endif  // CCREC_CODEC_HPP_
