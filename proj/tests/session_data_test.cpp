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

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "ccrec/errors.hpp"
#include "ccrec/session_data.hpp"

namespace ccrec::data {
namespace {

// Builds raw sessions from item-id lists.
std::vector<RawSession> sessions_of(
    const std::vector<std::vector<std::string>>& lists) {
  std::vector<RawSession> out;
  for (std::size_t i = 0; i < lists.size(); ++i)
    out.push_back({"s" + std::to_string(i), lists[i]});
  return out;
}

SplitOptions no_validation() {
  SplitOptions o;
  o.validation_fraction = 0.0;
  return o;
}

TEST(Ingest, GroupsAndOrdersSessions) {
  std::istringstream in(
      "# header\n"
      "a\tx\t3\nb\tp\t1\na\ty\t1\nb\tq\t2\na\tz\t2\nb\tr\t0\n");
  auto s = ingest(parse_events(in));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].id, "a");
  EXPECT_EQ(s[0].items, (std::vector<std::string>{"y", "z", "x"}));
  EXPECT_EQ(s[1].items, (std::vector<std::string>{"r", "p", "q"}));
}

TEST(Ingest, EqualTimestampsKeepInputOrder) {
  std::istringstream in("a\tx\t5\na\ty\t5\na\tz\t1\n");
  auto s = ingest(parse_events(in));
  EXPECT_EQ(s[0].items, (std::vector<std::string>{"z", "x", "y"}));
}

TEST(Ingest, MissingFieldReportsLine) {
  std::istringstream in("a\tx\t1\n\na\ty\n");
  try {
    parse_events(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Ingest, BadTimestampRejected) {
  std::istringstream in("a\tx\tnoon\n");
  EXPECT_THROW(parse_events(in), ParseError);
  std::istringstream neg("a\tx\t-4\n");
  EXPECT_THROW(parse_events(neg), ParseError);
}

TEST(FilterAndSplit, RareItemRemoved) {
  std::vector<std::vector<std::string>> lists;
  for (int i = 0; i < 5; ++i) lists.push_back({"a", "b", "c"});
  for (int i = 0; i < 4; ++i) lists.push_back({"a", "rare", "b"});
  auto ds = filter_and_split(sessions_of(lists), no_validation());
  EXPECT_EQ(ds.vocab.index.count("rare"), 0u);
  EXPECT_EQ(ds.num_items(), 3u);
}

TEST(FilterAndSplit, SessionShrunkToOneDropped) {
  std::vector<std::vector<std::string>> lists;
  for (int i = 0; i < 5; ++i) lists.push_back({"a", "b", "c"});
  lists.push_back({"a", "rare"});
  auto ds = filter_and_split(sessions_of(lists), no_validation());
  EXPECT_EQ(ds.test.size(), 5u);
}

TEST(FilterAndSplit, LastItemHeldOut) {
  std::vector<std::vector<std::string>> lists(5, {"a", "b", "c"});
  auto ds = filter_and_split(sessions_of(lists), no_validation());
  const auto& v = ds.vocab.index;
  ASSERT_EQ(ds.test.size(), 5u);
  EXPECT_EQ(ds.test[0].prefix, (std::vector<std::uint32_t>{v.at("a"), v.at("b")}));
  EXPECT_EQ(ds.test[0].label, v.at("c"));
  EXPECT_EQ(ds.train_sessions[0],
            (std::vector<std::uint32_t>{v.at("a"), v.at("b")}));
}

TEST(FilterAndSplit, NothingLeftIsDataError) {
  EXPECT_THROW(filter_and_split(sessions_of({{"a", "b"}}), no_validation()),
               DataError);
  EXPECT_THROW(filter_and_split({}, no_validation()), DataError);
}

TEST(FilterAndSplit, ValidationIsTenPercentAndDisjoint) {
  auto log = gen_synthetic(100, 1000, 3);
  SplitOptions o;
  o.seed = 9;
  auto ds = filter_and_split(ingest(log), o);
  const double total = double(ds.test.size());
  EXPECT_NEAR(double(ds.validation.size()) / total, 0.1, 0.005);
  EXPECT_EQ(ds.validation.size() + ds.train_sessions.size(), ds.test.size());
  auto again = filter_and_split(ingest(log), o);
  ASSERT_EQ(again.validation.size(), ds.validation.size());
  for (std::size_t i = 0; i < ds.validation.size(); ++i)
    EXPECT_EQ(again.validation[i].prefix, ds.validation[i].prefix);
}

TEST(Augment, SplitPattern) {
  std::vector<std::vector<std::string>> lists(5, {"a", "b", "c", "d"});
  auto ds = filter_and_split(sessions_of(lists), no_validation());
  augment(ds);
  const auto& v = ds.vocab.index;
  // Training portion [a,b,c] -> ([a],b), ([a,b],c)
  ASSERT_EQ(ds.train.size(), 10u);
  EXPECT_EQ(ds.train[0].prefix, (std::vector<std::uint32_t>{v.at("a")}));
  EXPECT_EQ(ds.train[0].label, v.at("b"));
  EXPECT_EQ(ds.train[1].prefix, (std::vector<std::uint32_t>{v.at("a"), v.at("b")}));
  EXPECT_EQ(ds.train[1].label, v.at("c"));
}

TEST(Augment, LengthTwoGivesOnePair) {
  SessionDataset ds;
  ds.train_sessions = {{0, 1}};
  augment(ds);
  ASSERT_EQ(ds.train.size(), 1u);
  EXPECT_EQ(ds.train[0].prefix, (std::vector<std::uint32_t>{0}));
}

TEST(Augment, CountIsSumOfLengthsMinusOne) {
  SessionDataset ds;
  for (std::uint32_t s = 0; s < 100; ++s) ds.train_sessions.push_back({s, 1, 2, 3, 4});
  augment(ds);
  EXPECT_EQ(ds.train.size(), 400u);

  auto real = filter_and_split(ingest(gen_synthetic(150, 800, 4)), no_validation());
  augment(real);
  std::size_t expect = 0;
  for (const auto& s : real.train_sessions) expect += s.size() - 1;
  EXPECT_EQ(real.train.size(), expect);
}

TEST(Augment, LongPrefixesKeepMostRecent) {
  SessionDataset ds;
  ds.max_len = 3;
  ds.train_sessions = {{0, 1, 2, 3, 4, 5}};
  augment(ds);
  EXPECT_EQ(ds.train.back().prefix, (std::vector<std::uint32_t>{2, 3, 4}));
  EXPECT_EQ(ds.train.back().label, 5u);
}

TEST(HotCold, TwentyPercentOfDistinctCounts) {
  ItemVocab v;
  v.ids.resize(10);
  v.counts = {5, 9, 1, 7, 3, 10, 2, 4, 6, 8};
  partition_hot_cold(v);
  EXPECT_EQ(v.num_hot(), 2u);
  EXPECT_TRUE(v.hot[5]);
  EXPECT_TRUE(v.hot[1]);
}

TEST(HotCold, TiesGoToSmallerIndex) {
  ItemVocab v;
  v.ids.resize(10);
  v.counts.assign(10, 3);
  partition_hot_cold(v);
  EXPECT_TRUE(v.hot[0]);
  EXPECT_TRUE(v.hot[1]);
  EXPECT_EQ(v.num_hot(), 2u);
}

TEST(HotCold, CeilingOfFifth) {
  EXPECT_EQ(hot_set_size(5), 1u);
  EXPECT_EQ(hot_set_size(6), 2u);
  EXPECT_EQ(hot_set_size(10), 2u);
  EXPECT_EQ(hot_set_size(11), 3u);
}

TEST(HotCold, InvariantsOnSyntheticData) {
  auto ds = filter_and_split(ingest(gen_synthetic(300, 3000, 5)), {});
  const auto& v = ds.vocab;
  EXPECT_EQ(v.num_hot(), hot_set_size(v.size()));
  std::uint64_t min_hot = ~0ull, max_cold = 0;
  for (std::size_t i = 0; i < v.size(); ++i)
    (v.hot[i] ? min_hot = std::min(min_hot, v.counts[i])
              : max_cold = std::max(max_cold, v.counts[i]));
  EXPECT_GE(min_hot, max_cold);
  // Counts come from the training portions only.
  std::vector<std::uint64_t> recount(v.size(), 0);
  for (const auto& s : ds.train_sessions)
    for (auto i : s) ++recount[i];
  EXPECT_EQ(recount, v.counts);
}

TEST(Synthetic, SameSeedSameLog) {
  auto a = gen_synthetic(50, 100, 7), b = gen_synthetic(50, 100, 7);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].item_id, b[i].item_id);
    EXPECT_EQ(a[i].timestamp, b[i].timestamp);
  }
  auto c = gen_synthetic(50, 100, 8);
  bool differs = c.size() != a.size();
  for (std::size_t i = 0; !differs && i < a.size(); ++i)
    differs = a[i].item_id != c[i].item_id;
  EXPECT_TRUE(differs);
}

TEST(Synthetic, PopularityIsSkewed) {
  std::map<std::string, std::size_t> count;
  for (const auto& e : gen_synthetic(200, 2000, 7)) ++count[e.item_id];
  std::vector<std::size_t> c;
  for (const auto& [k, v] : count) c.push_back(v);
  c.resize(200, 0);
  std::sort(c.begin(), c.end());
  const double median = (c[99] + c[100]) / 2.0;
  EXPECT_GT(double(c.back()), 3.0 * median);
}

TEST(Synthetic, SessionLengthsAtLeastTwoMeanNearSix) {
  auto sessions = ingest(gen_synthetic(100, 4000, 2));
  double total = 0;
  for (const auto& s : sessions) {
    EXPECT_GE(s.items.size(), 2u);
    total += double(s.items.size());
  }
  EXPECT_NEAR(total / double(sessions.size()), 6.0, 0.25);
}

TEST(Synthetic, TooFewItemsRejected) {
  EXPECT_THROW(gen_synthetic(5, 10, 1), ParameterError);
}

TEST(Batches, PartitionKeepsLastPartial) {
  ItemVocab v;
  v.ids.resize(3);
  v.hot = {1, 0, 0};
  std::vector<Sequence> seqs(250, Sequence{{0, 1}, 2});
  auto b = make_batches(seqs, v, 100, 50, 1);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].size, 100u);
  EXPECT_EQ(b[1].size, 100u);
  EXPECT_EQ(b[2].size, 50u);
}

TEST(Batches, SeededOrder) {
  ItemVocab v;
  v.ids.resize(300);
  v.hot.assign(300, 0);
  std::vector<Sequence> seqs;
  for (std::uint32_t i = 0; i < 300; ++i) seqs.push_back({{i}, i});
  auto a = make_batches(seqs, v, 64, 5, 42), b = make_batches(seqs, v, 64, 5, 42);
  auto c = make_batches(seqs, v, 64, 5, 43);
  EXPECT_EQ(a[0].labels, b[0].labels);
  EXPECT_NE(a[0].labels, c[0].labels);
  std::set<std::uint32_t> seen;
  for (const auto& batch : a) seen.insert(batch.labels.begin(), batch.labels.end());
  EXPECT_EQ(seen.size(), 300u);
}

TEST(Batches, LeftPaddedWithMasks) {
  ItemVocab v;
  v.ids.resize(4);
  v.hot = {1, 0, 0, 1};
  std::vector<Sequence> seqs = {{{0, 1, 3}, 2}, {{2, 3, 1, 0, 1, 2, 3}, 0}};
  auto b = make_batches(seqs, v, 2, 5, 0, false);
  ASSERT_EQ(b.size(), 1u);
  const auto& x = b[0];
  EXPECT_EQ(std::vector<std::uint32_t>(x.items.begin(), x.items.begin() + 5),
            (std::vector<std::uint32_t>{4, 4, 0, 1, 3}));
  EXPECT_EQ(std::vector<std::uint32_t>(x.items.begin() + 5, x.items.end()),
            (std::vector<std::uint32_t>{1, 0, 1, 2, 3}));
  EXPECT_EQ(x.lengths, (std::vector<std::uint32_t>{3, 5}));
  EXPECT_EQ(std::vector<std::uint8_t>(x.hot_mask.begin(), x.hot_mask.begin() + 5),
            (std::vector<std::uint8_t>{0, 0, 1, 0, 1}));
  EXPECT_EQ(std::vector<std::uint8_t>(x.cold_mask.begin(), x.cold_mask.begin() + 5),
            (std::vector<std::uint8_t>{0, 0, 0, 1, 0}));
  EXPECT_EQ(x.prefix(0).size(), 3u);
  EXPECT_EQ(x.prefix(0)[0], 0u);
}

TEST(Batches, ZeroSizeRejected) {
  ItemVocab v;
  EXPECT_THROW(make_batches({}, v, 0, 5, 0), ParameterError);
}

TEST(Closure, IndicesStayInsideVocabulary) {
  auto ds = filter_and_split(ingest(gen_synthetic(200, 2000, 7)), {});
  augment(ds);
  for (const auto* split : {&ds.train, &ds.validation, &ds.test})
    for (const auto& s : *split) {
      EXPECT_LT(s.label, ds.num_items());
      EXPECT_FALSE(s.prefix.empty());
      EXPECT_LE(s.prefix.size(), ds.max_len);
      for (auto i : s.prefix) EXPECT_LT(i, ds.num_items());
    }
}

TEST(Cache, RoundTrip) {
  auto ds = filter_and_split(ingest(gen_synthetic(120, 500, 1)), {});
  augment(ds);
  const auto base = std::filesystem::temp_directory_path() / "ccrec_ds_test" / "data";
  save_dataset(base, ds);
  auto back = load_dataset(base);
  EXPECT_EQ(back.vocab.ids, ds.vocab.ids);
  EXPECT_EQ(back.vocab.counts, ds.vocab.counts);
  EXPECT_EQ(back.vocab.hot, ds.vocab.hot);
  EXPECT_EQ(back.train_sessions, ds.train_sessions);
  ASSERT_EQ(back.train.size(), ds.train.size());
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    EXPECT_EQ(back.train[i].prefix, ds.train[i].prefix);
    EXPECT_EQ(back.train[i].label, ds.train[i].label);
  }
  ASSERT_EQ(back.test.size(), ds.test.size());
  EXPECT_EQ(back.test.back().label, ds.test.back().label);
  std::filesystem::remove_all(base.parent_path());
}

TEST(EventFiles, WriteThenRead) {
  auto log = gen_synthetic(20, 10, 1);
  const auto path = std::filesystem::temp_directory_path() / "ccrec_events.tsv";
  write_events(path, log);
  auto back = read_events(path);
  ASSERT_EQ(back.size(), log.size());
  EXPECT_EQ(back[3].item_id, log[3].item_id);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace ccrec::data
