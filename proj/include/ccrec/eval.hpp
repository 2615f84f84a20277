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

// Ranking metrics, memory accounting and the scoring-latency benchmark.
//
// Every test case has one relevant item. P@K is the percentage of cases whose
// label ranks in the top K; NDCG@K averages 1/log2(1 + rank) over hits, the
// ideal DCG being 1.

#ifndef CCREC_EVAL_HPP_
#define CCREC_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccrec/backbone.hpp"
#include "ccrec/codec.hpp"
#include "ccrec/session_data.hpp"
#include "ccrec/ttd.hpp"
#include "json.hpp"

namespace ccrec::eval {

// ---- ranking ----------------------------------------------------------------------

// 1-based rank of `label`: one plus the items scoring strictly higher plus the
// lower-indexed items with an equal score.
std::size_t rank_of(std::span<const double> scores, std::uint32_t label);
std::size_t rank_of(std::span<const float> scores, std::uint32_t label);

// Throw ParameterError for k == 0. An empty case list scores 0.
double precision_at_k(std::span<const std::size_t> ranks, std::size_t k);
double ndcg_at_k(std::span<const std::size_t> ranks, std::size_t k);

struct RankingReport {
  double p5 = 0.0, p10 = 0.0, ndcg5 = 0.0, ndcg10 = 0.0;
  std::size_t cases = 0;

  nlohmann::json to_json() const;
};

RankingReport ranking_report(std::span<const std::size_t> ranks);

// Ranks of every label when all sessions are answered by training popularity
// (ties to the lower index).
std::vector<std::size_t> popularity_ranks(const data::ItemVocab& vocab,
                                          const std::vector<data::Sequence>& seqs);

// ---- code usage -------------------------------------------------------------------

// M × K counts of how often each codeword is used.
std::vector<std::vector<std::uint64_t>> code_usage_histogram(
    const codec::CodeMatrix& codes);

// ---- memory -----------------------------------------------------------------------

struct MemoryComponent {
  std::string name;
  std::uint64_t parameters = 0;     // stored values (codes count one each)
  std::uint64_t formula_bytes = 0;  // from sizes alone
  std::optional<std::uint64_t> file_bytes;
};

struct MemoryReport {
  std::uint64_t num_items = 0;
  std::uint64_t dim = 0;
  std::vector<MemoryComponent> components;

  const MemoryComponent& get(const std::string& name) const;
  // Dense f32 table bytes over the component's measured bytes, else its
  // formula bytes.
  double ratio_vs_dense(const std::string& name) const;
  nlohmann::json to_json() const;
};

// Dense f32 table size.
std::uint64_t dense_table_bytes(std::uint64_t num_items, std::uint64_t dim);

// Packed codes at M·log2 K bits per item plus f32 codebooks, no header or
// padding. Throws ParameterError for zero M, K or N.
std::uint64_t codec_payload_bytes(std::uint64_t num_items, std::uint64_t dim,
                                  std::uint64_t m, std::uint64_t k);

struct MemoryInputs {
  std::uint64_t num_items = 0;
  std::uint64_t dim = 0;
  const codec::FrozenCodec* codec = nullptr;
  std::optional<std::filesystem::path> codec_file;  // measured when given
  const ttd::TTConfig* sttd = nullptr;
  std::uint64_t backbone_parameters = 0;
};

// Components "dense", "codec", "sttd", "backbone" as available. A codec file
// whose size differs from the payload by more than header plus per-item
// padding raises AccountingError.
MemoryReport memory_footprint(const MemoryInputs& in);

// ---- latency ----------------------------------------------------------------------

struct Workload {
  std::vector<std::vector<std::uint32_t>> sessions;
  std::uint64_t hash = 0;  // over the request stream
};

// `count` sessions with lengths uniform in [1, max_len] and uniform items.
Workload make_workload(std::size_t num_items, std::size_t count,
                       std::size_t max_len, std::uint64_t seed);
std::uint64_t workload_hash(const std::vector<std::vector<std::uint32_t>>& s);

// Supplies the |V| × N f32 item table for one scoring pass.
class ItemSource {
 public:
  virtual ~ItemSource() = default;
  virtual std::string name() const = 0;
  virtual std::size_t num_items() const = 0;
  virtual std::size_t dim() const = 0;
  // Pointer valid until the next call.
  virtual const float* table() = 0;
};

std::unique_ptr<ItemSource> dense_source(std::vector<float> table,
                                         std::size_t dim);
std::unique_ptr<ItemSource> codec_source(const codec::FrozenCodec& c);
// Reconstructs all |V| rows (virtual rows beyond |V| are skipped).
std::unique_ptr<ItemSource> sttd_source(const ttd::FrozenSTTD& c,
                                        std::size_t num_items, std::string name);

struct PassResult {
  std::uint64_t request_hash = 0;
  std::uint64_t checksum = 0;  // over the top-10 lists
  std::vector<std::vector<std::uint32_t>> top;
};

// One full pass: item table, embedding fetch, encoder, pooling, scores over
// every item and the top-k list per session.
PassResult scoring_pass(ItemSource& source, const model::FrozenEncoder& encoder,
                        const Workload& w, std::size_t top_k = 10);

struct LatencyEntry {
  std::string method;
  std::vector<double> seconds;  // per repetition
  double mean = 0.0;
  double stddev = 0.0;
  double table_mean = 0.0;  // item-table step alone
  std::uint64_t request_hash = 0;
  std::uint64_t checksum = 0;
};

struct LatencyReport {
  std::vector<LatencyEntry> entries;
  std::size_t reps = 0;
  std::size_t warmups = 0;
  int threads = 1;
  std::string dtype = "f32";
  std::size_t sessions = 0;

  const LatencyEntry& get(const std::string& method) const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
  std::string to_table() const;  // fixed width
};

struct BenchOptions {
  std::size_t reps = 5;
  std::size_t warmups = 2;
  int threads = 1;
};

// Times every source on the same workload. Throws ConfigError for a null
// source or fewer than 5 repetitions and ContractError when sources disagree
// on the request stream.
LatencyReport bench_reconstruction(const std::vector<ItemSource*>& sources,
                                   const model::FrozenEncoder& encoder,
                                   const Workload& w, const BenchOptions& opt);

// ---- synthetic latency scenario -------------------------------------------------

// Random-valued artifacts at a given scale. Scoring cost does not depend on
// trained values, so timing runs need no training.
struct ScenarioOptions {
  std::size_t num_items = 40728;
  std::size_t dim = 128;
  std::size_t m = 4;
  std::size_t k = 32;
  std::size_t sttd_d = 3;
  std::size_t sttd_rank = 64;
  std::size_t sttd_block = 2;
  std::size_t sessions = 100;
  std::size_t max_len = 50;
  std::uint64_t seed = 1;
};

struct Scenario {
  std::size_t num_items = 0;
  std::size_t dim = 0;
  model::EncoderConfig encoder_config;
  model::FrozenEncoder encoder;
  std::vector<float> dense;  // |V| × N
  codec::FrozenCodec codec;
  ttd::FrozenSTTD sttd;  // balanced row and column factors
  Workload workload;
};

Scenario synthetic_scenario(const ScenarioOptions& o);

}  // namespace ccrec::eval

#endif  // CCREC_EVAL_HPP_
