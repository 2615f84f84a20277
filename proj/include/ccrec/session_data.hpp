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

// Session logs: ingestion, filtering, splitting, augmentation, popularity,
// synthetic corpora and mini-batches.
//
// Event files are UTF-8 text with one `session_id \t item_id \t timestamp`
// record per line; lines starting with '#' and blank lines are skipped.

#ifndef CCREC_SESSION_DATA_HPP_
#define CCREC_SESSION_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace ccrec::data {

struct Event {
  std::string session_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

using EventLog = std::vector<Event>;

// Throws ParseError carrying the 1-based line number.
EventLog parse_events(std::istream& in);
EventLog read_events(const std::filesystem::path& path);
void write_events(const std::filesystem::path& path, const EventLog& log);

struct RawSession {
  std::string id;
  std::vector<std::string> items;  // time-ordered
};

// Groups by session (first-appearance order) and sorts each session by
// timestamp, keeping input order among equal timestamps.
std::vector<RawSession> ingest(const EventLog& log);

struct Sequence {
  std::vector<std::uint32_t> prefix;
  std::uint32_t label = 0;
};

struct ItemVocab {
  std::vector<std::string> ids;                       // index -> item id
  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::uint64_t> counts;                  // training interactions
  std::vector<std::uint8_t> hot;

  std::size_t size() const { return ids.size(); }
  std::uint32_t pad() const { return static_cast<std::uint32_t>(ids.size()); }
  std::size_t num_hot() const;
};

// ceil(0.2·n)
std::size_t hot_set_size(std::size_t n);

// Hot = the hot_set_size(|V|) largest counts, ties to the smaller index.
void partition_hot_cold(ItemVocab& vocab);

struct SplitOptions {
  std::size_t min_item_count = 5;
  double validation_fraction = 0.1;
  std::size_t max_len = 50;
  std::uint64_t seed = 0;
};

struct SessionDataset {
  ItemVocab vocab;
  std::size_t max_len = 50;
  // Training portions of each session (everything before the held-out last
  // item), before augmentation.
  std::vector<std::vector<std::uint32_t>> train_sessions;
  std::vector<Sequence> train;       // filled by augment()
  std::vector<Sequence> validation;
  std::vector<Sequence> test;

  std::size_t num_items() const { return vocab.size(); }
};

// Drops items seen fewer than min_item_count times, then sessions left with
// at most one item; holds out each session's last item as a test pair; moves
// a seeded random 10% of the training portions to validation (last item as
// label); counts training interactions and flags hot items. Throws DataError
// when nothing survives.
SessionDataset filter_and_split(const std::vector<RawSession>& sessions,
                                const SplitOptions& options);

// Replaces `train` by every prefix/label split of every training portion,
// keeping the most recent max_len items of long prefixes.
void augment(SessionDataset& ds);

// Most recent max_len items.
std::vector<std::uint32_t> truncate_left(std::span<const std::uint32_t> seq,
                                         std::size_t max_len);

// Seeded first-order Markov sessions over a power-law popularity
// (exponent 1.2). Throws ParameterError for num_items < 10.
EventLog gen_synthetic(std::size_t num_items, std::size_t num_sessions,
                       std::uint64_t seed);

struct Batch {
  std::size_t size = 0;
  std::size_t max_len = 0;
  std::vector<std::uint32_t> items;  // size × max_len, left-padded with pad
  std::vector<std::uint32_t> lengths;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint8_t> hot_mask;   // size × max_len
  std::vector<std::uint8_t> cold_mask;  // size × max_len

  // Unpadded items of row b.
  std::span<const std::uint32_t> prefix(std::size_t b) const;
};

Batch make_batch(std::span<const Sequence* const> seqs, const ItemVocab& vocab,
                 std::size_t max_len);

// Splits `seqs` into batches of batch_size (last partial kept). With
// shuffle the order is a seeded permutation. Throws ParameterError for a
// zero batch size.
std::vector<Batch> make_batches(const std::vector<Sequence>& seqs,
                                const ItemVocab& vocab, std::size_t batch_size,
                                std::size_t max_len, std::uint64_t seed,
                                bool shuffle = true);

// Dataset cache: `<base>.json` manifest plus `<base>.bin` holding
// little-endian uint32 arrays.
void save_dataset(const std::filesystem::path& base, const SessionDataset& ds);
SessionDataset load_dataset(const std::filesystem::path& base);

nlohmann::json dataset_stats(const SessionDataset& ds);

}  // namespace ccrec::data

#endif  // CCREC_SESSION_DATA_HPP_
