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

// Session encoder shared by teacher and student: item + position embedding,
// one causal self-attention block with a ReLU feed-forward layer, soft
// attention pooling, and full-vocabulary scoring.
//
// Sessions are processed unpadded. A session of length l occupies the last l
// of max_len positions, exactly as a left-padded row whose pads are masked
// out of attention, so padding never changes any output.
//
//   X̂ = X + P
//   F = LN(X̂ + Drop(Attn(X̂)))        causal, per-head projections
//   Θ = LN(F + Drop(W₂·relu(W₁F + b₁) + b₂))
//   α_t = fᵀσ(W₁ᵖx̄ + W₂ᵖx_t + c),  θ = Σ_t α_t x_t,  x̄ = mean_t x_t

#ifndef CCREC_BACKBONE_HPP_
#define CCREC_BACKBONE_HPP_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ccrec/checkpoint.hpp"
#include "ccrec/tensor.hpp"
#include "json.hpp"

namespace ccrec::model {

struct EncoderConfig {
  std::size_t dim = 100;
  std::size_t heads = 1;
  std::size_t max_len = 50;
  double dropout = 0.2;
  bool layer_norm = true;        // false: both norms pass through
  bool categorical_loss = false; // false: two-term binary form

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

struct EncoderParams {
  ad::Tensor position;                 // max_len × N
  std::vector<ad::Tensor> wq, wk, wv;  // per head, N × N/heads
  ad::Tensor wo;                       // N × N
  ad::Tensor ln1_gain, ln1_bias;       // 1 × N
  ad::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  ad::Tensor ln2_gain, ln2_bias;
  ad::Tensor pool_w1, pool_w2;  // N × N
  ad::Tensor pool_c;            // 1 × N
  ad::Tensor pool_f;            // N × 1

  // U(-0.1, 0.1) everywhere except unit norm gains and zero norm biases.
  static EncoderParams create(const EncoderConfig& c, std::mt19937_64& rng);

  ParamList named(const std::string& prefix) const;
  std::vector<ad::Tensor> tensors() const;
};

using SessionList = std::vector<std::span<const std::uint32_t>>;

struct Encoded {
  ad::Tensor reps;                    // Σ l × N, sessions stacked
  std::vector<std::size_t> lengths;   // per session
  std::vector<std::size_t> offsets;   // first row of each session
  std::vector<std::uint32_t> items;   // item of each row
};

// X̂ for the given sessions: table rows plus positions.
ad::Tensor embed(const EncoderParams& p, const EncoderConfig& c,
                 const ad::Tensor& table, const SessionList& sessions,
                 std::vector<std::size_t>* lengths = nullptr);

// Multi-head causal attention over stacked sessions, output projected by wo.
ad::Tensor self_attention(const EncoderParams& p, const EncoderConfig& c,
                          const ad::Tensor& x, std::span<const std::size_t> lengths);

// Full block. Throws DimensionError when a session exceeds max_len and
// ContractError for an empty session.
Encoded encode(const EncoderParams& p, const EncoderConfig& c,
               const ad::Tensor& table, const SessionList& sessions,
               bool training, std::mt19937_64& rng);

struct Pooled {
  ad::Tensor theta;  // groups × N
  ad::Tensor alpha;  // pooled rows × 1 (group order)
};

// Soft-attention pooling of groups of rows of `reps` (indices into reps).
// Empty groups pool to zero when allow_empty, else ContractError.
Pooled pool_groups(const EncoderParams& p, const ad::Tensor& reps,
                   const std::vector<std::vector<std::size_t>>& groups,
                   bool allow_empty = false);

// Pools every session of `enc` over all its rows.
Pooled pool_sessions(const EncoderParams& p, const Encoded& enc);

// Logits θ·Eᵀ over every row of `table` (groups × |V|).
ad::Tensor logits(const ad::Tensor& theta, const ad::Tensor& table);
// softmax(θ·Eᵀ)
ad::Tensor score(const ad::Tensor& theta, const ad::Tensor& table);

// Mean over the batch of -Σ_v [y_v log ŷ_v + (1-y_v) log(1-ŷ_v)] with ŷ
// clamped to [1e-8, 1-1e-8].
ad::Tensor rec_loss(const ad::Tensor& probs, std::span<const std::uint32_t> labels);

// Recommendation loss from logits per the configured form.
ad::Tensor rec_loss_from_logits(const ad::Tensor& logits,
                                std::span<const std::uint32_t> labels,
                                bool categorical);

// ---- frozen single-precision inference ---------------------------------------

struct FrozenEncoder {
  EncoderConfig config;
  std::vector<float> position;
  std::vector<std::vector<float>> wq, wk, wv;
  std::vector<float> wo, ln1_gain, ln1_bias, ffn_w1, ffn_b1, ffn_w2, ffn_b2,
      ln2_gain, ln2_bias, pool_w1, pool_w2, pool_c, pool_f;

  static FrozenEncoder freeze(const EncoderParams& p, const EncoderConfig& c);

  // Session representations θ (sessions × N) from item vectors already
  // fetched for every position: rows are the sessions' items stacked in
  // order (Σ l × N).
  void session_reps(const float* item_rows, std::span<const std::size_t> lengths,
                    float* theta) const;
};

}  // namespace ccrec::model

#endif  // CCREC_BACKBONE_HPP_
