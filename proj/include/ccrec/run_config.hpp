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

// Flat run configuration shared by every command.
//
// Keys are dotted names such as "encoder.dim" or "distill.beta", each with a
// fixed type and default. Sources apply in order (defaults, config file,
// command-line overrides) and the last write wins. Unknown keys and values
// that do not parse as the key's type raise ConfigError.
//
// Config files hold one "key = value" per line with '#' comments, or a flat
// JSON object when the name ends in ".json" (its "command" and "paths"
// entries, written by write_resolved callers, are ignored).

#ifndef CCREC_RUN_CONFIG_HPP_
#define CCREC_RUN_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ccrec/backbone.hpp"
#include "ccrec/codec.hpp"
#include "ccrec/distill.hpp"
#include "ccrec/eval.hpp"
#include "ccrec/session_data.hpp"
#include "ccrec/ttd.hpp"
#include "json.hpp"

namespace ccrec::config {

enum class Kind { kSize, kUint64, kDouble, kBool, kString, kList };

struct KeySpec {
  std::string key;
  Kind kind;
  std::string default_value;
  std::string help;
};

// Every recognized key.
const std::vector<KeySpec>& key_specs();

class RunConfig {
 public:
  RunConfig();

  bool known(const std::string& key) const;
  // ConfigError for an unknown key or a value of the wrong type.
  void set(const std::string& key, const std::string& value);
  // "key=value"
  void set_assignment(std::string_view assignment);

  // MissingInputError when the file cannot be read; ConfigError naming the
  // line for a malformed entry.
  void merge_file(const std::filesystem::path& path);
  void merge_text(std::string_view text, const std::string& source);
  void merge_json(const nlohmann::json& j, const std::string& source);

  const std::string& get(const std::string& key) const;
  std::size_t get_size(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  double get_double(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::string> get_list(const std::string& key) const;

  // Folds distill.ablation into the switches it controls so the resolved
  // configuration records the values actually used.
  void resolve_ablation();

  model::EncoderConfig encoder() const;
  codec::CodecConfig codec() const;  // N taken from encoder.dim
  data::SplitOptions split() const;
  distill::TrainOptions teacher() const;
  distill::DistillConfig distill() const;
  eval::BenchOptions bench() const;
  // STTD shape for |V| items; column factors default to a balanced split of N.
  ttd::TTConfig sttd(std::size_t num_items, std::size_t dim) const;

  // Typed values keyed by name, plus the command under "command".
  nlohmann::json to_json(const std::string& command) const;
  // Writes to_json(command) to `dir/<command>.config.json`.
  std::filesystem::path write_resolved(const std::filesystem::path& dir,
                                       const std::string& command) const;

 private:
  const KeySpec& spec(const std::string& key) const;

  std::map<std::string, std::string> values_;
};

}  // namespace ccrec::config

#endif  // CCREC_RUN_CONFIG_HPP_
