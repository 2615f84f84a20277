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

#include "ccrec/eval.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "ccrec/errors.hpp"

namespace ccrec::eval {
namespace {

// ---- ranking ----------------------------------------------------------------------

TEST(Rank, CountsHigherScoresAndLowerIndexedTies) {
  const std::vector<double> s{0.1, 0.5, 0.5, 0.9, 0.5};
  EXPECT_EQ(rank_of(s, 3), 1u);
  EXPECT_EQ(rank_of(s, 1), 2u);
  EXPECT_EQ(rank_of(s, 2), 3u);
  EXPECT_EQ(rank_of(s, 4), 4u);
  EXPECT_EQ(rank_of(s, 0), 5u);
  const std::vector<float> f{1.0f, 1.0f};
  EXPECT_EQ(rank_of(f, 1), 2u);
  EXPECT_THROW(rank_of(s, 5), IndexError);
}

TEST(Rank, AgreesWithSortingOracle) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> pick(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(12);
    for (auto& v : s) v = pick(rng);  // many ties
    std::vector<std::uint32_t> order(s.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return s[a] > s[b]; });
    for (std::size_t pos = 0; pos < order.size(); ++pos)
      EXPECT_EQ(rank_of(s, order[pos]), pos + 1);
  }
}

TEST(Metrics, HandEvaluatedExamples) {
  const std::vector<std::size_t> ranks{1, 3, 7, 12};
  EXPECT_DOUBLE_EQ(precision_at_k(ranks, 5), 50.0);
  EXPECT_DOUBLE_EQ(precision_at_k(ranks, 10), 75.0);
  const double ndcg5 = (1.0 + 1.0 / std::log2(4.0)) / 4.0 * 100.0;
  const double ndcg10 = (1.0 + 1.0 / std::log2(4.0) + 1.0 / std::log2(8.0)) / 4.0 * 100.0;
  EXPECT_NEAR(ndcg_at_k(ranks, 5), ndcg5, 1e-12);
  EXPECT_NEAR(ndcg_at_k(ranks, 10), ndcg10, 1e-12);
  const RankingReport r = ranking_report(ranks);
  EXPECT_EQ(r.cases, 4u);
  EXPECT_DOUBLE_EQ(r.p10, 75.0);
  const nlohmann::json j = r.to_json();
  for (const char* key : {"P@5", "P@10", "NDCG@5", "NDCG@10"}) EXPECT_TRUE(j.contains(key));
}

TEST(Metrics, EdgeCases) {
  const std::vector<std::size_t> none;
  EXPECT_EQ(precision_at_k(none, 10), 0.0);
  EXPECT_EQ(ndcg_at_k(none, 10), 0.0);
  const std::vector<std::size_t> top{1, 1};
  EXPECT_DOUBLE_EQ(precision_at_k(top, 1), 100.0);
  EXPECT_DOUBLE_EQ(ndcg_at_k(top, 1), 100.0);
  EXPECT_THROW(precision_at_k(top, 0), ParameterError);
  EXPECT_THROW(ndcg_at_k(top, 0), ParameterError);
}

TEST(Metrics, BoundsAndMonotonicity) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> rank(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::size_t> r(1 + trial % 17);
    for (auto& v : r) v = rank(rng);
    double prev_p = 0.0;
    for (std::size_t k = 1; k <= 20; ++k) {
      const double p = precision_at_k(r, k), n = ndcg_at_k(r, k);
      EXPECT_GE(p, prev_p);
      EXPECT_LE(n, p + 1e-12);
      EXPECT_GE(n, 0.0);
      EXPECT_LE(p, 100.0);
      prev_p = p;
    }
  }
}

TEST(Popularity, RanksFollowTrainingCounts) {
  data::ItemVocab vocab;
  vocab.ids = {"a", "b", "c", "d"};
  vocab.counts = {3, 9, 3, 1};
  const std::vector<data::Sequence> seqs{{{0}, 1}, {{1}, 0}, {{3}, 2}, {{2}, 3}};
  const auto ranks = popularity_ranks(vocab, seqs);
  EXPECT_EQ(ranks, (std::vector<std::size_t>{1, 2, 3, 4}));
}

// ---- code usage -------------------------------------------------------------------

TEST(Usage, HistogramMatchesCounting) {
  codec::CodeMatrix c{5, 2, 3, {0, 2, 1, 2, 0, 0, 2, 1, 0, 2}};
  const auto h = code_usage_histogram(c);
  ASSERT_EQ(h.size(), 2u);
  EXPECT_EQ(h[0], (std::vector<std::uint64_t>{3, 1, 1}));
  EXPECT_EQ(h[1], (std::vector<std::uint64_t>{1, 1, 3}));
  for (const auto& row : h)
    EXPECT_EQ(std::accumulate(row.begin(), row.end(), std::uint64_t{0}), 5u);
}

// ---- memory -----------------------------------------------------------------------

codec::FrozenCodec random_codec(std::size_t items, std::size_t n, std::size_t m,
                                std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  codec::CodecConfig cfg;
  cfg.m = m;
  cfg.k = k;
  cfg.dim = n;
  codec::CodeMatrix codes{items, m, k, std::vector<std::uint32_t>(items * m)};
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(k - 1));
  for (auto& v : codes.codes) v = pick(rng);
  return codec::FrozenCodec::freeze(codes, codec::Codebooks::create(cfg, rng));
}

TEST(Memory, DenseTableBytes) {
  EXPECT_EQ(dense_table_bytes(20000, 100), 8000000u);
  MemoryInputs in;
  in.num_items = 20000;
  in.dim = 100;
  const MemoryReport r = memory_footprint(in);
  EXPECT_EQ(r.get("dense").formula_bytes, 8000000u);
  EXPECT_EQ(r.get("dense").parameters, 2000000u);
  EXPECT_THROW(r.get("codec"), ConfigError);
}

TEST(Memory, CodecPayloadFormula) {
  // 1000 items × 4 books × 5 bits = 2500 bytes; 4·32·100 f32 books.
  EXPECT_EQ(codec_payload_bytes(1000, 100, 4, 32), 2500u + 51200u);
  // Fractional byte rounds up.
  EXPECT_EQ(codec_payload_bytes(3, 2, 1, 8), 2u + 64u);
  EXPECT_THROW(codec_payload_bytes(3, 0, 1, 8), ParameterError);
}

TEST(Memory, MeasuredFileWithinHeaderAndPadding) {
  const codec::FrozenCodec c = random_codec(301, 8, 3, 8, 2);
  const auto dir = std::filesystem::temp_directory_path() / "ccrec_eval_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "codes.ccec";
  codec::save_packed(path, c);
  MemoryInputs in;
  in.num_items = 301;
  in.dim = 8;
  in.codec = &c;
  in.codec_file = path;
  const MemoryReport r = memory_footprint(in);
  const MemoryComponent& m = r.get("codec");
  ASSERT_TRUE(m.file_bytes.has_value());
  EXPECT_EQ(*m.file_bytes, std::filesystem::file_size(path));
  EXPECT_GE(*m.file_bytes, m.formula_bytes);
  EXPECT_LE(*m.file_bytes - m.formula_bytes, codec::kPackedHeaderBytes + 301u);
  EXPECT_NEAR(r.ratio_vs_dense("codec"),
              static_cast<double>(301 * 8 * 4) / static_cast<double>(*m.file_bytes),
              1e-12);

  // Truncated and inflated files break the accounting.
  std::filesystem::resize_file(path, m.formula_bytes - 1);
  EXPECT_THROW(memory_footprint(in), AccountingError);
  std::filesystem::resize_file(path, m.formula_bytes + codec::kPackedHeaderBytes + 302);
  EXPECT_THROW(memory_footprint(in), AccountingError);
  std::filesystem::remove_all(dir);
}

TEST(Memory, MismatchedCodecIsRejected) {
  const codec::FrozenCodec c = random_codec(10, 4, 2, 4, 3);
  MemoryInputs in;
  in.num_items = 11;
  in.dim = 4;
  in.codec = &c;
  EXPECT_THROW(memory_footprint(in), AccountingError);
}

TEST(Memory, SttdAndBackboneComponents) {
  ttd::TTConfig t;
  t.row_factors = {5, 5};
  t.col_factors = {2, 4};
  t.rank = 4;
  t.block = 2;
  MemoryInputs in;
  in.num_items = 25;
  in.dim = 8;
  in.sttd = &t;
  in.backbone_parameters = 123;
  const MemoryReport r = memory_footprint(in);
  const std::uint64_t p = ttd::STTDCores::zeros(t).parameter_count();
  EXPECT_EQ(r.get("sttd").parameters, p);
  EXPECT_EQ(r.get("sttd").formula_bytes, 4 * p);
  EXPECT_EQ(r.get("backbone").formula_bytes, 492u);
  EXPECT_TRUE(r.to_json().is_object());
}

// ---- latency ----------------------------------------------------------------------

TEST(Workload, SeededAndHashed) {
  const Workload a = make_workload(50, 20, 7, 1), b = make_workload(50, 20, 7, 1);
  const Workload c = make_workload(50, 20, 7, 2);
  EXPECT_EQ(a.sessions, b.sessions);
  EXPECT_EQ(a.hash, b.hash);
  EXPECT_NE(a.hash, c.hash);
  EXPECT_EQ(a.hash, workload_hash(a.sessions));
  for (const auto& s : a.sessions) {
    EXPECT_GE(s.size(), 1u);
    EXPECT_LE(s.size(), 7u);
    for (auto v : s) EXPECT_LT(v, 50u);
  }
  // Session boundaries are part of the hash.
  EXPECT_NE(workload_hash({{1, 2}, {3}}), workload_hash({{1}, {2, 3}}));
}

struct ScoringSetup {
  model::EncoderConfig config;
  model::EncoderParams params;
  codec::FrozenCodec codec;
  std::vector<float> dense;

  ScoringSetup() {
    config.dim = 8;
    config.heads = 1;
    config.max_len = 10;
    config.dropout = 0.0;
    std::mt19937_64 rng(4);
    params = model::EncoderParams::create(config, rng);
    codec = random_codec(60, 8, 2, 4, 5);
    dense.resize(60 * 8);
    codec.reconstruct_table(dense.data());
  }
};

TEST(ScoringPass, TopListsAgreeWithDoublePrecisionScores) {
  ScoringSetup s;
  const Workload w = make_workload(60, 12, 8, 6);
  auto source = dense_source(s.dense, 8);
  const PassResult r =
      scoring_pass(*source, model::FrozenEncoder::freeze(s.params, s.config), w);
  ASSERT_EQ(r.top.size(), 12u);
  EXPECT_EQ(r.request_hash, w.hash);

  ad::Tensor table = ad::Tensor::zeros({60, 8});
  for (std::size_t i = 0; i < s.dense.size(); ++i) table.mutable_values()[i] = s.dense[i];
  model::SessionList list;
  for (const auto& x : w.sessions) list.emplace_back(x);
  std::mt19937_64 rng(0);
  ad::NoGradGuard guard;
  const auto enc = model::encode(s.params, s.config, table, list, false, rng);
  const ad::Tensor theta = model::pool_sessions(s.params, enc).theta;
  for (std::size_t q = 0; q < 12; ++q) {
    std::vector<double> sc(60, 0.0);
    for (std::size_t v = 0; v < 60; ++v)
      for (std::size_t j = 0; j < 8; ++j) sc[v] += theta.at(q, j) * table.at(v, j);
    const double best = *std::max_element(sc.begin(), sc.end());
    ASSERT_EQ(r.top[q].size(), 10u);
    EXPECT_NEAR(sc[r.top[q][0]], best, 1e-4);
    for (std::size_t i = 1; i < 10; ++i)
      EXPECT_LE(sc[r.top[q][i]], sc[r.top[q][i - 1]] + 1e-4);
  }
}

TEST(ScoringPass, SourcesWithTheSameTableAgree) {
  ScoringSetup s;
  const Workload w = make_workload(60, 9, 6, 7);
  const auto enc = model::FrozenEncoder::freeze(s.params, s.config);
  auto dense = dense_source(s.dense, 8);
  auto codec = codec_source(s.codec);
  const PassResult a = scoring_pass(*dense, enc, w), b = scoring_pass(*codec, enc, w);
  EXPECT_EQ(a.checksum, b.checksum);
  EXPECT_EQ(a.top, b.top);
}

TEST(ScoringPass, RejectsMismatchedDimensionAndItems) {
  ScoringSetup s;
  const auto enc = model::FrozenEncoder::freeze(s.params, s.config);
  auto narrow = dense_source(std::vector<float>(60 * 4, 0.0f), 4);
  EXPECT_THROW(scoring_pass(*narrow, enc, make_workload(60, 2, 3, 1)), DimensionError);
  auto dense = dense_source(s.dense, 8);
  EXPECT_THROW(scoring_pass(*dense, enc, make_workload(61, 40, 8, 1)), IndexError);
}

TEST(Bench, ReportsEveryMethodWithMatchingStreams) {
  ScoringSetup s;
  const Workload w = make_workload(60, 5, 5, 8);
  const auto enc = model::FrozenEncoder::freeze(s.params, s.config);
  auto dense = dense_source(s.dense, 8);
  auto codec = codec_source(s.codec);
  BenchOptions opt;
  opt.reps = 5;
  opt.warmups = 1;
  const LatencyReport r = bench_reconstruction({dense.get(), codec.get()}, enc, w, opt);
  ASSERT_EQ(r.entries.size(), 2u);
  for (const char* m : {"dense", "codec"}) {
    const LatencyEntry& e = r.get(m);
    EXPECT_EQ(e.seconds.size(), 5u);
    EXPECT_GT(e.mean, 0.0);
    EXPECT_GE(e.stddev, 0.0);
    EXPECT_EQ(e.request_hash, w.hash);
  }
  EXPECT_EQ(r.get("dense").checksum, r.get("codec").checksum);
  EXPECT_EQ(r.reps, 5u);
  EXPECT_EQ(r.sessions, 5u);
  EXPECT_NE(r.to_csv().find("method,reps,mean_s"), std::string::npos);
  EXPECT_NE(r.to_table().find("codec"), std::string::npos);
  EXPECT_EQ(r.to_json()["methods"].size(), 2u);

  opt.reps = 4;
  EXPECT_THROW(bench_reconstruction({dense.get()}, enc, w, opt), ConfigError);
  opt.reps = 5;
  EXPECT_THROW(bench_reconstruction({dense.get(), nullptr}, enc, w, opt), ConfigError);
}

}  // namespace
}  // namespace ccrec::eval
