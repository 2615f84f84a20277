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

// Reference model-size grid for |V| = 20000, N = 100 and its comparison with
// compression_ratio(). Reference values are data; computed values always come
// from the formula.

#ifndef CCREC_RATIO_CHECK_HPP_
#define CCREC_RATIO_CHECK_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "ccrec/codec.hpp"

namespace ccrec::codec {

struct ReferenceRow {
  std::uint64_t m = 0, k = 0;
  std::uint64_t size = 0;   // listed compressed parameter count
  std::uint64_t floor = 0;  // listed integer ratio
};

inline constexpr std::uint64_t kReferenceItems = 20000;
inline constexpr std::uint64_t kReferenceDim = 100;

const std::vector<ReferenceRow>& reference_rows();

struct RatioCheckRow {
  ReferenceRow reference;
  Ratio computed;
  bool size_matches = false;
  bool floor_matches = false;
  bool matches() const { return size_matches && floor_matches; }
};

struct RatioCheck {
  std::vector<RatioCheckRow> rows;
  std::size_t matches() const;
  bool all_match() const { return matches() == rows.size(); }
  std::string to_table() const;  // fixed width, one line per row plus a summary
};

RatioCheck check_ratios();

}  // namespace ccrec::codec

#endif  // CCREC_RATIO_CHECK_HPP_
