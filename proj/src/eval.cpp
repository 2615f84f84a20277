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

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "ccrec/binary_io.hpp"
#include "ccrec/errors.hpp"
#include "ccrec/kernels.hpp"

namespace ccrec::eval {
namespace {

template <typename T>
std::size_t rank_impl(std::span<const T> scores, std::uint32_t label) {
  if (label >= scores.size())
    throw IndexError("rank: label " + std::to_string(label) + " outside [0, " +
                     std::to_string(scores.size()) + ")");
  const T target = scores[label];
  std::size_t rank = 1;
  for (std::size_t v = 0; v < scores.size(); ++v)
    if (scores[v] > target || (scores[v] == target && v < label)) ++rank;
  return rank;
}

void check_k(std::size_t k) {
  if (k == 0) throw ParameterError("metric cut-off K must be at least 1");
}

}  // namespace

std::size_t rank_of(std::span<const double> scores, std::uint32_t label) {
  return rank_impl(scores, label);
}

std::size_t rank_of(std::span<const float> scores, std::uint32_t label) {
  return rank_impl(scores, label);
}

double precision_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_k(k);
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r : ranks) hits += (r >= 1 && r <= k) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double ndcg_at_k(std::span<const std::size_t> ranks, std::size_t k) {
  check_k(k);
  if (ranks.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t r : ranks)
    if (r >= 1 && r <= k) total += 1.0 / std::log2(1.0 + static_cast<double>(r));
  return 100.0 * total / static_cast<double>(ranks.size());
}

nlohmann::json RankingReport::to_json() const {
  return {{"P@5", p5},         {"P@10", p10}, {"NDCG@5", ndcg5},
          {"NDCG@10", ndcg10}, {"cases", cases}};
}

RankingReport ranking_report(std::span<const std::size_t> ranks) {
  RankingReport r;
  r.p5 = precision_at_k(ranks, 5);
  r.p10 = precision_at_k(ranks, 10);
  r.ndcg5 = ndcg_at_k(ranks, 5);
  r.ndcg10 = ndcg_at_k(ranks, 10);
  r.cases = ranks.size();
  return r;
}

std::vector<std::size_t> popularity_ranks(const data::ItemVocab& vocab,
                                          const std::vector<data::Sequence>& seqs) {
  std::vector<double> scores(vocab.counts.begin(), vocab.counts.end());
  std::vector<std::size_t> ranks;
  ranks.reserve(seqs.size());
  for (const auto& s : seqs) ranks.push_back(rank_of(std::span<const double>(scores), s.label));
  return ranks;
}

std::vector<std::vector<std::uint64_t>> code_usage_histogram(
    const codec::CodeMatrix& codes) {
  codes.validate();
  std::vector<std::vector<std::uint64_t>> counts(codes.m,
                                                 std::vector<std::uint64_t>(codes.k));
  for (std::size_t v = 0; v < codes.num_items; ++v)
    for (std::size_t i = 0; i < codes.m; ++i) ++counts[i][codes.at(v, i)];
  return counts;
}

// ---- memory -----------------------------------------------------------------------

std::uint64_t dense_table_bytes(std::uint64_t num_items, std::uint64_t dim) {
  return num_items * dim * sizeof(float);
}

std::uint64_t codec_payload_bytes(std::uint64_t num_items, std::uint64_t dim,
                                  std::uint64_t m, std::uint64_t k) {
  if (m == 0 || k == 0 || dim == 0)
    throw ParameterError("codec size needs positive M, K and N");
  if ((k & (k - 1)) != 0)
    throw ParameterError("codec size: K=" + std::to_string(k) +
                         " is not a power of two");
  const std::uint64_t bits = num_items * m * static_cast<std::uint64_t>(std::countr_zero(k));
  return (bits + 7) / 8 + m * k * dim * sizeof(float);
}

const MemoryComponent& MemoryReport::get(const std::string& name) const {
  for (const auto& c : components)
    if (c.name == name) return c;
  throw ConfigError("memory report has no component '" + name + "'");
}

double MemoryReport::ratio_vs_dense(const std::string& name) const {
  const MemoryComponent& c = get(name);
  const std::uint64_t bytes = c.file_bytes.value_or(c.formula_bytes);
  return static_cast<double>(dense_table_bytes(num_items, dim)) /
         static_cast<double>(bytes);
}

nlohmann::json MemoryReport::to_json() const {
  nlohmann::json j;
  j["num_items"] = num_items;
  j["N"] = dim;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& c : components) {
    nlohmann::json e{{"name", c.name},
                     {"parameters", c.parameters},
                     {"formula_bytes", c.formula_bytes}};
    if (c.file_bytes) e["file_bytes"] = *c.file_bytes;
    if (c.name != "backbone") e["ratio_vs_dense"] = ratio_vs_dense(c.name);
    list.push_back(e);
  }
  j["components"] = list;
  return j;
}

MemoryReport memory_footprint(const MemoryInputs& in) {
  if (in.num_items == 0 || in.dim == 0)
    throw ParameterError("memory report needs positive |V| and N");
  MemoryReport r;
  r.num_items = in.num_items;
  r.dim = in.dim;
  r.components.push_back({"dense", in.num_items * in.dim,
                          dense_table_bytes(in.num_items, in.dim), std::nullopt});
  if (in.codec != nullptr) {
    const codec::FrozenCodec& c = *in.codec;
    if (c.codes.num_items != in.num_items || c.dim != in.dim)
      throw AccountingError("codec covers " + std::to_string(c.codes.num_items) +
                            " x " + std::to_string(c.dim) + ", expected " +
                            std::to_string(in.num_items) + " x " +
                            std::to_string(in.dim));
    MemoryComponent comp;
    comp.name = "codec";
    comp.parameters = in.num_items * c.codes.m + c.codes.m * c.codes.k * in.dim;
    comp.formula_bytes = codec_payload_bytes(in.num_items, in.dim, c.codes.m, c.codes.k);
    if (in.codec_file) {
      const std::uint64_t measured = std::filesystem::file_size(*in.codec_file);
      const std::uint64_t overhead = codec::kPackedHeaderBytes + in.num_items;
      if (measured < comp.formula_bytes || measured - comp.formula_bytes > overhead)
        throw AccountingError("packed code file has " + std::to_string(measured) +
                              " bytes; payload formula gives " +
                              std::to_string(comp.formula_bytes) +
                              " plus at most " + std::to_string(overhead) +
                              " bytes of header and padding");
      comp.file_bytes = measured;
    }
    r.components.push_back(comp);
  }
  if (in.sttd != nullptr) {
    const ttd::STTDCores zero = ttd::STTDCores::zeros(*in.sttd);
    const std::uint64_t p = zero.parameter_count();
    r.components.push_back({"sttd", p, p * sizeof(float), std::nullopt});
  }
  if (in.backbone_parameters > 0)
    r.components.push_back({"backbone", in.backbone_parameters,
                            in.backbone_parameters * sizeof(float), std::nullopt});
  return r;
}

// ---- latency ----------------------------------------------------------------------

std::uint64_t workload_hash(const std::vector<std::vector<std::uint32_t>>& s) {
  std::uint64_t h = io::fnv1a(nullptr, 0);
  for (const auto& session : s) {
    const std::uint64_t len = session.size();
    h = io::fnv1a(&len, sizeof(len), h);
    h = io::fnv1a(session.data(), session.size() * sizeof(std::uint32_t), h);
  }
  return h;
}

Workload make_workload(std::size_t num_items, std::size_t count,
                       std::size_t max_len, std::uint64_t seed) {
  if (num_items == 0 || count == 0 || max_len == 0)
    throw ParameterError("workload needs items, sessions and a positive max_len");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::uint32_t> item(
      0, static_cast<std::uint32_t>(num_items - 1));
  Workload w;
  w.sessions.resize(count);
  for (auto& s : w.sessions) {
    s.resize(len(rng));
    for (auto& v : s) v = item(rng);
  }
  w.hash = workload_hash(w.sessions);
  return w;
}

namespace {

class DenseSource final : public ItemSource {
 public:
  DenseSource(std::vector<float> table, std::size_t dim)
      : table_(std::move(table)), dim_(dim) {
    if (dim_ == 0 || table_.size() % dim_ != 0)
      throw DimensionError("dense table size is not a multiple of N");
  }
  std::string name() const override { return "dense"; }
  std::size_t num_items() const override { return table_.size() / dim_; }
  std::size_t dim() const override { return dim_; }
  const float* table() override { return table_.data(); }

 private:
  std::vector<float> table_;
  std::size_t dim_;
};

class CodecSource final : public ItemSource {
 public:
  explicit CodecSource(const codec::FrozenCodec& c)
      : codec_(c), buffer_(c.codes.num_items * c.dim) {}
  std::string name() const override { return "codec"; }
  std::size_t num_items() const override { return codec_.codes.num_items; }
  std::size_t dim() const override { return codec_.dim; }
  const float* table() override {
    codec_.reconstruct_table(buffer_.data());
    return buffer_.data();
  }

 private:
  const codec::FrozenCodec& codec_;
  std::vector<float> buffer_;
};

class STTDSource final : public ItemSource {
 public:
  STTDSource(const ttd::FrozenSTTD& c, std::size_t num_items, std::string name)
      : cores_(c), name_(std::move(name)), rows_(num_items),
        buffer_(num_items * c.config.dim()) {
    if (num_items > c.config.padded_rows())
      throw DimensionError("sttd source: " + std::to_string(num_items) +
                           " items exceed the factorized row count");
    std::iota(rows_.begin(), rows_.end(), 0);
  }
  std::string name() const override { return name_; }
  std::size_t num_items() const override { return rows_.size(); }
  std::size_t dim() const override { return cores_.config.dim(); }
  const float* table() override {
    cores_.reconstruct_rows(rows_, buffer_.data());
    return buffer_.data();
  }

 private:
  const ttd::FrozenSTTD& cores_;
  std::string name_;
  std::vector<std::size_t> rows_;
  std::vector<float> buffer_;
};

// scores[s·V + v] = θ_s · table_v, item rows in the outer loop so each row is
// read once per pass.
void score_all(const float* theta, std::size_t sessions, const float* table,
               std::size_t items, std::size_t n, float* scores) {
  for (std::size_t v = 0; v < items; ++v) {
    const float* row = table + v * n;
    for (std::size_t s = 0; s < sessions; ++s) {
      const float* t = theta + s * n;
      float acc = 0.0f;
#pragma omp simd reduction(+ : acc)
      for (std::size_t j = 0; j < n; ++j) acc += t[j] * row[j];
      scores[s * items + v] = acc;
    }
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::unique_ptr<ItemSource> dense_source(std::vector<float> table, std::size_t dim) {
  return std::make_unique<DenseSource>(std::move(table), dim);
}

std::unique_ptr<ItemSource> codec_source(const codec::FrozenCodec& c) {
  return std::make_unique<CodecSource>(c);
}

std::unique_ptr<ItemSource> sttd_source(const ttd::FrozenSTTD& c,
                                        std::size_t num_items, std::string name) {
  return std::make_unique<STTDSource>(c, num_items, std::move(name));
}

PassResult scoring_pass(ItemSource& source, const model::FrozenEncoder& encoder,
                        const Workload& w, std::size_t top_k) {
  const std::size_t n = source.dim(), items = source.num_items();
  if (n != encoder.config.dim)
    throw DimensionError("scoring pass: source N=" + std::to_string(n) +
                         " differs from encoder N=" +
                         std::to_string(encoder.config.dim));
  PassResult out;
  out.request_hash = workload_hash(w.sessions);
  const float* table = source.table();

  std::vector<std::size_t> lengths;
  std::size_t total = 0;
  for (const auto& s : w.sessions) {
    lengths.push_back(s.size());
    total += s.size();
  }
  std::vector<float> rows(total * n);
  std::size_t r = 0;
  for (const auto& s : w.sessions)
    for (std::uint32_t v : s) {
      if (v >= items) throw IndexError("scoring pass: item " + std::to_string(v));
      std::copy_n(table + static_cast<std::size_t>(v) * n, n, rows.data() + r++ * n);
    }
  std::vector<float> theta(w.sessions.size() * n);
  encoder.session_reps(rows.data(), lengths, theta.data());

  std::vector<float> scores(w.sessions.size() * items);
  score_all(theta.data(), w.sessions.size(), table, items, n, scores.data());

  const std::size_t k = std::min(top_k, items);
  std::vector<std::uint32_t> order(items);
  out.checksum = io::fnv1a(nullptr, 0);
  for (std::size_t s = 0; s < w.sessions.size(); ++s) {
    const float* sc = scores.data() + s * items;
    std::iota(order.begin(), order.end(), 0u);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                      order.end(), [sc](std::uint32_t a, std::uint32_t b) {
                        return sc[a] > sc[b] || (sc[a] == sc[b] && a < b);
                      });
    out.top.emplace_back(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    out.checksum = io::fnv1a(order.data(), k * sizeof(std::uint32_t), out.checksum);
  }
  return out;
}

const LatencyEntry& LatencyReport::get(const std::string& method) const {
  for (const auto& e : entries)
    if (e.method == method) return e;
  throw ConfigError("latency report has no method '" + method + "'");
}

nlohmann::json LatencyReport::to_json() const {
  nlohmann::json j;
  j["reps"] = reps;
  j["warmups"] = warmups;
  j["threads"] = threads;
  j["dtype"] = dtype;
  j["sessions_per_pass"] = sessions;
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : entries)
    list.push_back({{"method", e.method},
                    {"seconds", e.seconds},
                    {"mean_s", e.mean},
                    {"stddev_s", e.stddev},
                    {"table_mean_s", e.table_mean},
                    {"request_hash", e.request_hash},
                    {"checksum", e.checksum}});
  j["methods"] = list;
  return j;
}

std::string LatencyReport::to_csv() const {
  std::ostringstream out;
  out << "method,reps,mean_s,stddev_s,table_mean_s\n";
  for (const auto& e : entries)
    out << e.method << ',' << e.seconds.size() << ',' << e.mean << ',' << e.stddev
        << ',' << e.table_mean << '\n';
  return out.str();
}

std::string LatencyReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %16s %14s %14s\n", "Method",
                "Time / pass (s)", "Std dev (s)", "Table (s)");
  out << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof(line), "%-12s %16.6f %14.6f %14.6f\n",
                  e.method.c_str(), e.mean, e.stddev, e.table_mean);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%zu sessions per pass, %zu reps after %zu warmups, %d thread(s), %s\n",
                sessions, reps, warmups, threads, dtype.c_str());
  out << line;
  return out.str();
}

LatencyReport bench_reconstruction(const std::vector<ItemSource*>& sources,
                                   const model::FrozenEncoder& encoder,
                                   const Workload& w, const BenchOptions& opt) {
  if (opt.reps < 5)
    throw ConfigError("benchmark needs at least 5 repetitions, got " +
                      std::to_string(opt.reps));
  for (const ItemSource* s : sources)
    if (s == nullptr) throw ConfigError("benchmark: missing artifact for a method");
  const int saved = kernels::max_threads();
  kernels::set_threads(opt.threads);

  LatencyReport report;
  report.reps = opt.reps;
  report.warmups = opt.warmups;
  report.threads = opt.threads;
  report.sessions = w.sessions.size();
  try {
    for (ItemSource* src : sources) {
      LatencyEntry e;
      e.method = src->name();
      for (std::size_t i = 0; i < opt.warmups; ++i) scoring_pass(*src, encoder, w);
      for (std::size_t i = 0; i < opt.reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const PassResult r = scoring_pass(*src, encoder, w);
        e.seconds.push_back(seconds_since(t0));
        e.request_hash = r.request_hash;
        e.checksum = r.checksum;
      }
      double table_total = 0.0;
      for (std::size_t i = 0; i < opt.reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        volatile float sink = src->table()[0];
        (void)sink;
        table_total += seconds_since(t0);
      }
      e.table_mean = table_total / static_cast<double>(opt.reps);
      e.mean = std::accumulate(e.seconds.begin(), e.seconds.end(), 0.0) /
               static_cast<double>(e.seconds.size());
      double var = 0.0;
      for (double s : e.seconds) var += (s - e.mean) * (s - e.mean);
      e.stddev = std::sqrt(var / static_cast<double>(e.seconds.size() - 1));
      report.entries.push_back(std::move(e));
    }
  } catch (...) {
    kernels::set_threads(saved);
    throw;
  }
  kernels::set_threads(saved);
  for (const auto& e : report.entries)
    if (e.request_hash != w.hash)
      throw ContractError("benchmark: method " + e.method +
                          " consumed a different request stream");
  return report;
}

// ---- synthetic latency scenario -------------------------------------------------

Scenario synthetic_scenario(const ScenarioOptions& o) {
  std::mt19937_64 rng(o.seed);
  Scenario sc;
  sc.num_items = o.num_items;
  sc.dim = o.dim;
  sc.encoder_config.dim = o.dim;
  sc.encoder_config.heads = 1;
  sc.encoder_config.max_len = o.max_len;
  sc.encoder = model::FrozenEncoder::freeze(
      model::EncoderParams::create(sc.encoder_config, rng), sc.encoder_config);

  std::uniform_real_distribution<float> unit(-0.1f, 0.1f);
  sc.dense.resize(o.num_items * o.dim);
  for (float& v : sc.dense) v = unit(rng);

  codec::CodecConfig cc;
  cc.m = o.m;
  cc.k = o.k;
  cc.dim = o.dim;
  codec::CodeMatrix codes{o.num_items, o.m, o.k,
                          std::vector<std::uint32_t>(o.num_items * o.m)};
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(o.k - 1));
  for (auto& c : codes.codes) c = pick(rng);
  sc.codec = codec::FrozenCodec::freeze(codes, codec::Codebooks::create(cc, rng));

  ttd::TTConfig tt;
  tt.row_factors = ttd::balanced_row_factors(o.num_items, o.sttd_d);
  tt.col_factors = ttd::balanced_col_factors(o.dim, o.sttd_d);
  tt.rank = o.sttd_rank;
  tt.block = o.sttd_block;
  tt.validate_for(o.num_items, o.dim);
  sc.sttd = ttd::FrozenSTTD::freeze(ttd::STTDCores::uniform(tt, 0.1, rng));

  sc.workload = make_workload(o.num_items, o.sessions, o.max_len, o.seed + 1);
  return sc;
}

}  // namespace ccrec::eval
