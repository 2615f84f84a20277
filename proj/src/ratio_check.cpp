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

#include "ccrec/ratio_check.hpp"

#include <cstdio>
#include <sstream>

namespace ccrec::codec {

const std::vector<ReferenceRow>& reference_rows() {
  static const std::vector<ReferenceRow> rows = {
      {2, 8, 41600, 48},   {2, 128, 65600, 30},  {2, 512, 142400, 14},
      {4, 8, 83200, 24},   {4, 128, 131200, 15}, {4, 512, 284800, 7},
      {8, 8, 185600, 11},  {8, 128, 262400, 8},  {8, 512, 569600, 3},
  };
  return rows;
}

std::size_t RatioCheck::matches() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.matches() ? 1 : 0;
  return n;
}

std::string RatioCheck::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%3s %4s %10s %10s %6s %6s %9s  %s\n", "M", "K",
                "size", "listed", "floor", "listed", "ratio", "status");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%3llu %4llu %10llu %10llu %6llu %6llu %9.4f  %s\n",
                  static_cast<unsigned long long>(r.reference.m),
                  static_cast<unsigned long long>(r.reference.k),
                  static_cast<unsigned long long>(r.computed.compressed),
                  static_cast<unsigned long long>(r.reference.size),
                  static_cast<unsigned long long>(r.computed.floor),
                  static_cast<unsigned long long>(r.reference.floor), r.computed.value,
                  r.matches() ? "match" : "MISMATCH");
    out << line;
  }
  out << matches() << "/" << rows.size() << " rows match\n";
  return out.str();
}

RatioCheck check_ratios() {
  RatioCheck c;
  for (const ReferenceRow& ref : reference_rows()) {
    RatioCheckRow row;
    row.reference = ref;
    row.computed = compression_ratio(kReferenceItems, kReferenceDim, ref.m, ref.k);
    row.size_matches = row.computed.compressed == ref.size;
    row.floor_matches = row.computed.floor == ref.floor;
    c.rows.push_back(row);
  }
  return c;
}

}  // namespace ccrec::codec
