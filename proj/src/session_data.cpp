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

#include "ccrec/session_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "ccrec/binary_io.hpp"
#include "ccrec/checkpoint.hpp"
#include "ccrec/errors.hpp"

namespace ccrec::data {

// ---- event files --------------------------------------------------------------

EventLog parse_events(std::istream& in) {
  EventLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3)
      throw ParseError("expected 3 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    if (fields[0].empty() || fields[1].empty())
      throw ParseError("empty session or item id", line_no);
    Event e{fields[0], fields[1], 0};
    const auto& ts = fields[2];
    auto [ptr, ec] = std::from_chars(ts.data(), ts.data() + ts.size(), e.timestamp);
    if (ec != std::errc() || ptr != ts.data() + ts.size() || e.timestamp < 0)
      throw ParseError("bad timestamp '" + ts + "'", line_no);
    log.push_back(std::move(e));
  }
  return log;
}

EventLog read_events(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open event file " + path.string());
  return parse_events(in);
}

void write_events(const std::filesystem::path& path, const EventLog& log) {
  std::ostringstream os;
  os << "# session_id\titem_id\ttimestamp\n";
  for (const auto& e : log)
    os << e.session_id << '\t' << e.item_id << '\t' << e.timestamp << '\n';
  io::write_text(path, os.str());
}

std::vector<RawSession> ingest(const EventLog& log) {
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<const Event*>> grouped;
  std::vector<RawSession> out;
  for (const auto& e : log) {
    auto [it, fresh] = slot.emplace(e.session_id, grouped.size());
    if (fresh) {
      grouped.emplace_back();
      out.push_back({e.session_id, {}});
    }
    grouped[it->second].push_back(&e);
  }
  for (std::size_t s = 0; s < grouped.size(); ++s) {
    auto& g = grouped[s];
    std::stable_sort(g.begin(), g.end(), [](const Event* a, const Event* b) {
      return a->timestamp < b->timestamp;
    });
    for (const Event* e : g) out[s].items.push_back(e->item_id);
  }
  return out;
}

// ---- vocabulary -------------------------------------------------------------------

std::size_t hot_set_size(std::size_t n) { return (n + 4) / 5; }

std::size_t ItemVocab::num_hot() const {
  return static_cast<std::size_t>(std::count(hot.begin(), hot.end(), 1));
}

void partition_hot_cold(ItemVocab& vocab) {
  const std::size_t n = vocab.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return vocab.counts[a] > vocab.counts[b];
  });
  vocab.hot.assign(n, 0);
  for (std::size_t k = 0; k < hot_set_size(n); ++k) vocab.hot[order[k]] = 1;
}

// ---- splitting -------------------------------------------------------------------

std::vector<std::uint32_t> truncate_left(std::span<const std::uint32_t> seq,
                                         std::size_t max_len) {
  const std::size_t skip = seq.size() > max_len ? seq.size() - max_len : 0;
  return {seq.begin() + static_cast<std::ptrdiff_t>(skip), seq.end()};
}

SessionDataset filter_and_split(const std::vector<RawSession>& sessions,
                                const SplitOptions& options) {
  if (sessions.empty()) throw DataError("no sessions to split");
  if (options.max_len == 0) throw ParameterError("max_len must be >= 1");
  std::unordered_map<std::string, std::size_t> global;
  for (const auto& s : sessions)
    for (const auto& it : s.items) ++global[it];

  SessionDataset ds;
  ds.max_len = options.max_len;
  ItemVocab& vocab = ds.vocab;
  std::vector<std::vector<std::uint32_t>> kept;
  for (const auto& s : sessions) {
    std::vector<const std::string*> items;
    for (const auto& it : s.items)
      if (global[it] >= options.min_item_count) items.push_back(&it);
    if (items.size() <= 1) continue;
    std::vector<std::uint32_t> idx;
    for (const std::string* it : items) {
      auto [pos, fresh] =
          vocab.index.emplace(*it, static_cast<std::uint32_t>(vocab.ids.size()));
      if (fresh) vocab.ids.push_back(*it);
      idx.push_back(pos->second);
    }
    kept.push_back(std::move(idx));
  }
  if (kept.empty())
    throw DataError("no sessions survive filtering (items seen < " +
                    std::to_string(options.min_item_count) +
                    " times, sessions of length <= 1)");

  for (auto& s : kept) {
    const std::span<const std::uint32_t> all(s);
    ds.test.push_back({truncate_left(all.first(s.size() - 1), ds.max_len), s.back()});
    s.pop_back();
  }

  // Validation: a seeded uniform sample of the training portions that can
  // still form a (prefix, label) pair.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < kept.size(); ++i)
    if (kept[i].size() >= 2) eligible.push_back(i);
  const auto want = static_cast<std::size_t>(
      std::llround(options.validation_fraction * static_cast<double>(kept.size())));
  std::mt19937_64 rng(options.seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  eligible.resize(std::min(want, eligible.size()));
  std::sort(eligible.begin(), eligible.end());
  std::vector<std::uint8_t> is_val(kept.size(), 0);
  for (std::size_t i : eligible) is_val[i] = 1;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (is_val[i]) {
      const std::span<const std::uint32_t> all(kept[i]);
      ds.validation.push_back(
          {truncate_left(all.first(all.size() - 1), ds.max_len), all.back()});
    } else {
      ds.train_sessions.push_back(std::move(kept[i]));
    }
  }

  vocab.counts.assign(vocab.size(), 0);
  for (const auto& s : ds.train_sessions)
    for (std::uint32_t v : s) ++vocab.counts[v];
  partition_hot_cold(vocab);
  return ds;
}

void augment(SessionDataset& ds) {
  ds.train.clear();
  for (const auto& s : ds.train_sessions) {
    const std::span<const std::uint32_t> all(s);
    for (std::size_t l = 1; l < s.size(); ++l)
      ds.train.push_back({truncate_left(all.first(l), ds.max_len), s[l]});
  }
}

// ---- synthetic corpora --------------------------------------------------------------

EventLog gen_synthetic(std::size_t num_items, std::size_t num_sessions,
                       std::uint64_t seed) {
  if (num_items < 10)
    throw ParameterError("gen_synthetic: need at least 10 items, got " +
                         std::to_string(num_items));
  constexpr double kExponent = 1.2;
  constexpr double kStickiness = 0.8;  // weight of the neighbour walk
  constexpr double kStop = 0.2;        // geometric tail, mean length 2 + 4
  std::mt19937_64 rng(seed);

  // Popularity rank r has weight (r+1)^-1.2; ranks are assigned to items by
  // a random permutation so popularity is unrelated to the item index.
  std::vector<std::size_t> item_of_rank(num_items);
  std::iota(item_of_rank.begin(), item_of_rank.end(), 0);
  std::shuffle(item_of_rank.begin(), item_of_rank.end(), rng);
  std::vector<double> weight(num_items);
  for (std::size_t r = 0; r < num_items; ++r)
    weight[item_of_rank[r]] = std::pow(static_cast<double>(r + 1), -kExponent);
  std::discrete_distribution<std::size_t> popular(weight.begin(), weight.end());

  // Neighbours on a random ring. A Metropolis step towards them keeps the
  // popularity distribution stationary while adding sequential structure.
  std::vector<std::size_t> ring(num_items), ring_pos(num_items);
  std::iota(ring.begin(), ring.end(), 0);
  std::shuffle(ring.begin(), ring.end(), rng);
  for (std::size_t p = 0; p < num_items; ++p) ring_pos[ring[p]] = p;
  const std::ptrdiff_t offsets[4] = {-2, -1, 1, 2};

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::geometric_distribution<std::size_t> extra(kStop);
  EventLog log;
  std::int64_t clock = 1600000000;
  for (std::size_t s = 0; s < num_sessions; ++s) {
    const std::size_t len = 2 + extra(rng);
    const std::string sid = "s" + std::to_string(s);
    std::size_t cur = popular(rng);
    for (std::size_t t = 0; t < len; ++t) {
      if (t > 0) {
        if (unit(rng) < kStickiness) {
          const auto off = offsets[rng() % 4];
          const auto n = static_cast<std::ptrdiff_t>(num_items);
          const std::size_t cand =
              ring[static_cast<std::size_t>(
                  ((static_cast<std::ptrdiff_t>(ring_pos[cur]) + off) % n + n) % n)];
          if (unit(rng) < std::min(1.0, weight[cand] / weight[cur])) cur = cand;
        } else {
          cur = popular(rng);
        }
      }
      log.push_back({sid, "item" + std::to_string(cur), clock});
      clock += 30 + static_cast<std::int64_t>(rng() % 300);
    }
    clock += 3600;
  }
  return log;
}

// ---- batches ----------------------------------------------------------------------

std::span<const std::uint32_t> Batch::prefix(std::size_t b) const {
  return std::span<const std::uint32_t>(items).subspan(
      b * max_len + (max_len - lengths[b]), lengths[b]);
}

Batch make_batch(std::span<const Sequence* const> seqs, const ItemVocab& vocab,
                 std::size_t max_len) {
  Batch b;
  b.size = seqs.size();
  b.max_len = max_len;
  b.items.assign(b.size * max_len, vocab.pad());
  b.hot_mask.assign(b.size * max_len, 0);
  b.cold_mask.assign(b.size * max_len, 0);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const auto p = truncate_left(seqs[i]->prefix, max_len);
    if (p.empty()) throw DataError("empty prefix in batch");
    const std::size_t off = max_len - p.size();
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p[t] >= vocab.size())
        throw IndexError("item index " + std::to_string(p[t]) +
                         " outside vocabulary of " + std::to_string(vocab.size()));
      const std::size_t at = i * max_len + off + t;
      b.items[at] = p[t];
      b.hot_mask[at] = vocab.hot[p[t]];
      b.cold_mask[at] = !vocab.hot[p[t]];
    }
    b.lengths.push_back(static_cast<std::uint32_t>(p.size()));
    b.labels.push_back(seqs[i]->label);
  }
  return b;
}

std::vector<Batch> make_batches(const std::vector<Sequence>& seqs,
                                const ItemVocab& vocab, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed,
                                bool shuffle) {
  if (batch_size == 0) throw ParameterError("batch size must be >= 1");
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::vector<Batch> out;
  std::vector<const Sequence*> chunk;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    chunk.clear();
    for (std::size_t k = start; k < std::min(order.size(), start + batch_size); ++k)
      chunk.push_back(&seqs[order[k]]);
    out.push_back(make_batch(chunk, vocab, max_len));
  }
  return out;
}

// ---- cache ------------------------------------------------------------------------

namespace {

constexpr const char* kDatasetFormat = "ccrec-dataset";

void put_u32_array(io::ByteWriter& w, std::span<const std::uint32_t> v) {
  for (std::uint32_t x : v) w.put_uint<std::uint32_t>(x);
}

nlohmann::json write_sequences(io::ByteWriter& w, const std::vector<Sequence>& seqs) {
  const std::size_t offset = w.bytes().size();
  std::size_t total = 0;
  for (const auto& s : seqs) {
    w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(s.prefix.size()));
    w.put_uint<std::uint32_t>(s.label);
    put_u32_array(w, s.prefix);
    total += s.prefix.size();
  }
  return {{"offset", offset}, {"count", seqs.size()}, {"items", total}};
}

std::vector<Sequence> read_sequences(const std::vector<std::uint8_t>& blob,
                                     const nlohmann::json& entry) {
  const std::size_t offset = entry.at("offset");
  const std::size_t count = entry.at("count");
  if (offset > blob.size()) throw FormatError("dataset split offset past end of blob");
  io::ByteReader r(blob.data() + offset, blob.size() - offset);
  std::vector<Sequence> out(count);
  for (auto& s : out) {
    const std::uint32_t len = r.get_uint<std::uint32_t>();
    s.label = r.get_uint<std::uint32_t>();
    s.prefix.resize(len);
    for (auto& v : s.prefix) v = r.get_uint<std::uint32_t>();
  }
  return out;
}

}  // namespace

void save_dataset(const std::filesystem::path& base, const SessionDataset& ds) {
  io::ByteWriter w;
  nlohmann::json splits;
  std::vector<Sequence> portions;
  for (const auto& s : ds.train_sessions) portions.push_back({s, 0});
  splits["train_sessions"] = write_sequences(w, portions);
  splits["train"] = write_sequences(w, ds.train);
  splits["validation"] = write_sequences(w, ds.validation);
  splits["test"] = write_sequences(w, ds.test);
  const std::size_t counts_offset = w.bytes().size();
  for (std::uint64_t c : ds.vocab.counts)
    w.put_uint<std::uint32_t>(static_cast<std::uint32_t>(c));
  nlohmann::json manifest = {
      {"format", kDatasetFormat},
      {"version", 1},
      {"blob", blob_path(base).filename().string()},
      {"encoding", "little-endian uint32; per sequence: length, label, items"},
      {"num_items", ds.num_items()},
      {"max_len", ds.max_len},
      {"item_ids", ds.vocab.ids},
      {"counts_offset", counts_offset},
      {"splits", splits},
  };
  io::write_file(blob_path(base), w.bytes());
  io::write_text(manifest_path(base), manifest.dump(1) + "\n");
}

SessionDataset load_dataset(const std::filesystem::path& base) {
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(io::read_text(manifest_path(base)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad dataset manifest: " + std::string(e.what()));
  }
  if (m.value("format", "") != kDatasetFormat || m.value("version", 0) != 1)
    throw FormatError(manifest_path(base).string() + " is not a dataset manifest");
  const auto blob = io::read_file(blob_path(base));
  SessionDataset ds;
  try {
    ds.max_len = m.at("max_len");
    ds.vocab.ids = m.at("item_ids").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < ds.vocab.ids.size(); ++i)
      ds.vocab.index.emplace(ds.vocab.ids[i], static_cast<std::uint32_t>(i));
    const auto& s = m.at("splits");
    for (auto& p : read_sequences(blob, s.at("train_sessions")))
      ds.train_sessions.push_back(std::move(p.prefix));
    ds.train = read_sequences(blob, s.at("train"));
    ds.validation = read_sequences(blob, s.at("validation"));
    ds.test = read_sequences(blob, s.at("test"));
    const std::size_t off = m.at("counts_offset");
    if (off > blob.size()) throw FormatError("counts offset past end of blob");
    io::ByteReader r(blob.data() + off, blob.size() - off);
    ds.vocab.counts.resize(ds.vocab.size());
    for (auto& c : ds.vocab.counts) c = r.get_uint<std::uint32_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad dataset manifest: " + std::string(e.what()));
  }
  partition_hot_cold(ds.vocab);
  return ds;
}

nlohmann::json dataset_stats(const SessionDataset& ds) {
  std::size_t clicks = 0;
  for (const auto& s : ds.train_sessions) clicks += s.size();
  double avg = 0;
  for (const auto& s : ds.test) avg += static_cast<double>(s.prefix.size() + 1);
  if (!ds.test.empty()) avg /= static_cast<double>(ds.test.size());
  return {{"items", ds.num_items()},
          {"hot_items", ds.vocab.num_hot()},
          {"sessions", ds.test.size()},
          {"train_sessions", ds.train_sessions.size()},
          {"train_clicks", clicks},
          {"train_pairs", ds.train.size()},
          {"validation_pairs", ds.validation.size()},
          {"test_pairs", ds.test.size()},
          {"avg_session_length", avg},
          {"max_len", ds.max_len}};
}

}  // namespace ccrec::data
