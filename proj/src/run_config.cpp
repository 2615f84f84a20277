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

#include "ccrec/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "ccrec/binary_io.hpp"
#include "ccrec/errors.hpp"

namespace ccrec::config {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, out);
  return r.ec == std::errc() && r.ptr == end && !s.empty();
}

bool parse_bool(const std::string& s, bool& out) {
  std::string v = s;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "no" || v == "off") {
    out = false;
    return true;
  }
  return false;
}

bool valid(Kind kind, const std::string& v) {
  switch (kind) {
    case Kind::kSize: {
      std::size_t x;
      return parse_number(v, x);
    }
    case Kind::kUint64: {
      std::uint64_t x;
      return parse_number(v, x);
    }
    case Kind::kDouble: {
      double x;
      return parse_number(v, x);
    }
    case Kind::kBool: {
      bool x;
      return parse_bool(v, x);
    }
    case Kind::kString:
    case Kind::kList:
      return true;
  }
  return false;
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::kSize:
    case Kind::kUint64:
      return "a non-negative integer";
    case Kind::kDouble:
      return "a number";
    case Kind::kBool:
      return "a boolean";
    case Kind::kString:
      return "a string";
    case Kind::kList:
      return "a comma-separated list";
  }
  return "";
}

std::vector<std::size_t> parse_sizes(const std::vector<std::string>& items,
                                     const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& s : items) {
    std::size_t v;
    if (!parse_number(s, v)) throw ConfigError(key + ": '" + s + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

}  // namespace

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", Kind::kUint64, "0", "master random seed"},
      {"data.path", Kind::kString, "", "tab-separated event log: session, item, timestamp"},
      {"data.synthetic", Kind::kBool, "false", "generate a synthetic corpus"},
      {"data.items", Kind::kSize, "200", "synthetic item count"},
      {"data.sessions", Kind::kSize, "2000", "synthetic session count"},
      {"data.min_item_count", Kind::kSize, "5", "drop rarer items"},
      {"data.validation_fraction", Kind::kDouble, "0.1", "training sessions held for validation"},
      {"data.max_len", Kind::kSize, "50", "most recent items kept per prefix"},
      {"encoder.dim", Kind::kSize, "100", "embedding size N"},
      {"encoder.heads", Kind::kSize, "1", "attention heads"},
      {"encoder.dropout", Kind::kDouble, "0.2", "dropout rate"},
      {"encoder.layer_norm", Kind::kBool, "true", "layer normalization"},
      {"encoder.categorical_loss", Kind::kBool, "false", "softmax loss over all items"},
      {"teacher.epochs", Kind::kSize, "30", "teacher epochs"},
      {"teacher.batch_size", Kind::kSize, "100", "teacher batch size"},
      {"teacher.lr", Kind::kDouble, "0.001", "teacher learning rate"},
      {"teacher.weight_decay", Kind::kDouble, "1e-05", "teacher L2 weight decay"},
      {"codec.M", Kind::kSize, "4", "codebooks"},
      {"codec.K", Kind::kSize, "32", "codewords per book"},
      {"codec.epsilon", Kind::kDouble, "0.3", "Gumbel-Softmax temperature"},
      {"codec.eta", Kind::kDouble, "0.8", "mixup weight on the teacher embedding"},
      {"codec.per_book_heads", Kind::kBool, "false", "separate output head per book"},
      {"distill.beta", Kind::kDouble, "0.01", "contrastive weight"},
      {"distill.gamma", Kind::kDouble, "0.3", "soft-target weight"},
      {"distill.tau", Kind::kDouble, "0.2", "contrastive temperature"},
      {"distill.mixup", Kind::kBool, "true", "embedding mixup"},
      {"distill.bidirectional", Kind::kBool, "true", "update the teacher jointly"},
      {"distill.alternating", Kind::kBool, "false", "alternate teacher and student steps"},
      {"distill.teacher_rec_in_joint", Kind::kBool, "true",
       "teacher recommendation loss in the joint objective"},
      {"distill.pretrain_epochs", Kind::kSize, "5", "student pretraining epochs"},
      {"distill.joint_epochs", Kind::kSize, "30", "joint epochs"},
      {"distill.batch_size", Kind::kSize, "100", "distillation batch size"},
      {"distill.lr", Kind::kDouble, "0.001", "distillation learning rate"},
      {"distill.weight_decay", Kind::kDouble, "1e-05", "distillation L2 weight decay"},
      {"distill.ablation", Kind::kString, "none", "ablation variant"},
      {"bench.methods", Kind::kList, "dense,codec,sttd", "methods to time"},
      {"bench.reps", Kind::kSize, "5", "timed repetitions"},
      {"bench.warmups", Kind::kSize, "2", "untimed repetitions"},
      {"bench.threads", Kind::kSize, "1", "OpenMP threads"},
      {"bench.sessions", Kind::kSize, "100", "sessions per scoring pass"},
      {"bench.session_len", Kind::kSize, "50", "longest workload session"},
      {"sttd.d", Kind::kSize, "3", "chain length"},
      {"sttd.rank", Kind::kSize, "64", "TT rank R"},
      {"sttd.block", Kind::kSize, "2", "semi-tensor block n"},
      {"sttd.col_factors", Kind::kList, "", "column factors J (default: balanced split of N)"},
      {"sttd.fit_steps", Kind::kSize, "200", "optimizer steps fitting cores to the teacher table"},
      {"sttd.lr", Kind::kDouble, "0.01", "core fitting learning rate"},
  };
  return specs;
}

RunConfig::RunConfig() {
  for (const auto& s : key_specs()) values_[s.key] = s.default_value;
}

bool RunConfig::known(const std::string& key) const { return values_.count(key) > 0; }

const KeySpec& RunConfig::spec(const std::string& key) const {
  for (const auto& s : key_specs())
    if (s.key == key) return s;
  throw ConfigError("unknown configuration key '" + key + "'");
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec& s = spec(key);
  const std::string v = trim(value);
  if (!valid(s.kind, v))
    throw ConfigError(key + " expects " + kind_name(s.kind) + ", got '" + v + "'");
  values_[key] = v;
}

void RunConfig::set_assignment(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
  set(trim(assignment.substr(0, eq)), std::string(assignment.substr(eq + 1)));
}

void RunConfig::merge_text(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(line.substr(0, hash));
    if (body.empty()) continue;
    try {
      set_assignment(body);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void RunConfig::merge_json(const nlohmann::json& j, const std::string& source) {
  if (!j.is_object()) throw ConfigError(source + ": expected a flat JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "command" || key == "paths") continue;
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean() || value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (const auto& item : value) {
        if (!text.empty()) text += ',';
        text += item.is_string() ? item.get<std::string>() : item.dump();
      }
    } else {
      throw ConfigError(source + ": value of '" + key + "' is not a scalar or list");
    }
    try {
      set(key, text);
    } catch (const ConfigError& e) {
      throw ConfigError(source + ": " + e.what());
    }
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  const std::string text = io::read_text(path);
  if (path.extension() == ".json") {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
    merge_json(j, path.string());
  } else {
    merge_text(text, path.string());
  }
}

const std::string& RunConfig::get(const std::string& key) const {
  spec(key);
  return values_.at(key);
}

std::size_t RunConfig::get_size(const std::string& key) const {
  std::size_t v = 0;
  parse_number(get(key), v);
  return v;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  std::uint64_t v = 0;
  parse_number(get(key), v);
  return v;
}

double RunConfig::get_double(const std::string& key) const {
  double v = 0.0;
  parse_number(get(key), v);
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  parse_bool(get(key), v);
  return v;
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get(key));
  std::string item;
  while (std::getline(in, item, ','))
    if (const std::string t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

void RunConfig::resolve_ablation() {
  distill::DistillConfig c = distill();
  distill::apply_ablation(c, get("distill.ablation"));
  values_["distill.beta"] = nlohmann::json(c.beta).dump();
  values_["distill.gamma"] = nlohmann::json(c.gamma).dump();
  values_["distill.mixup"] = c.mixup ? "true" : "false";
  values_["distill.bidirectional"] = c.bidirectional ? "true" : "false";
}

model::EncoderConfig RunConfig::encoder() const {
  model::EncoderConfig c;
  c.dim = get_size("encoder.dim");
  c.heads = get_size("encoder.heads");
  c.max_len = get_size("data.max_len");
  c.dropout = get_double("encoder.dropout");
  c.layer_norm = get_bool("encoder.layer_norm");
  c.categorical_loss = get_bool("encoder.categorical_loss");
  c.validate();
  return c;
}

codec::CodecConfig RunConfig::codec() const {
  codec::CodecConfig c;
  c.m = get_size("codec.M");
  c.k = get_size("codec.K");
  c.dim = get_size("encoder.dim");
  c.epsilon = get_double("codec.epsilon");
  c.eta = get_double("codec.eta");
  c.per_book_heads = get_bool("codec.per_book_heads");
  c.validate();
  return c;
}

data::SplitOptions RunConfig::split() const {
  data::SplitOptions o;
  o.min_item_count = get_size("data.min_item_count");
  o.validation_fraction = get_double("data.validation_fraction");
  o.max_len = get_size("data.max_len");
  o.seed = get_u64("seed");
  return o;
}

distill::TrainOptions RunConfig::teacher() const {
  distill::TrainOptions o;
  o.epochs = get_size("teacher.epochs");
  o.batch_size = get_size("teacher.batch_size");
  o.lr = get_double("teacher.lr");
  o.weight_decay = get_double("teacher.weight_decay");
  o.seed = get_u64("seed");
  return o;
}

distill::DistillConfig RunConfig::distill() const {
  distill::DistillConfig c;
  c.beta = get_double("distill.beta");
  c.gamma = get_double("distill.gamma");
  c.tau = get_double("distill.tau");
  c.mixup = get_bool("distill.mixup");
  c.bidirectional = get_bool("distill.bidirectional");
  c.alternating = get_bool("distill.alternating");
  c.teacher_rec_in_joint = get_bool("distill.teacher_rec_in_joint");
  c.pretrain_epochs = get_size("distill.pretrain_epochs");
  c.joint_epochs = get_size("distill.joint_epochs");
  c.batch_size = get_size("distill.batch_size");
  c.lr = get_double("distill.lr");
  c.weight_decay = get_double("distill.weight_decay");
  c.seed = get_u64("seed");
  c.ablation = get("distill.ablation");
  c.validate();
  return c;
}

eval::BenchOptions RunConfig::bench() const {
  eval::BenchOptions o;
  o.reps = get_size("bench.reps");
  o.warmups = get_size("bench.warmups");
  o.threads = static_cast<int>(get_size("bench.threads"));
  return o;
}

ttd::TTConfig RunConfig::sttd(std::size_t num_items, std::size_t dim) const {
  const std::size_t d = get_size("sttd.d");
  ttd::TTConfig c;
  c.row_factors = ttd::balanced_row_factors(num_items, d);
  const auto cols = get_list("sttd.col_factors");
  c.col_factors = cols.empty() ? ttd::balanced_col_factors(dim, d)
                               : parse_sizes(cols, "sttd.col_factors");
  c.rank = get_size("sttd.rank");
  c.block = get_size("sttd.block");
  c.validate_for(num_items, dim);
  return c;
}

nlohmann::json RunConfig::to_json(const std::string& command) const {
  nlohmann::json j;
  j["command"] = command;
  for (const auto& s : key_specs()) {
    const std::string& v = values_.at(s.key);
    switch (s.kind) {
      case Kind::kSize:
        j[s.key] = get_size(s.key);
        break;
      case Kind::kUint64:
        j[s.key] = get_u64(s.key);
        break;
      case Kind::kDouble:
        j[s.key] = get_double(s.key);
        break;
      case Kind::kBool:
        j[s.key] = get_bool(s.key);
        break;
      case Kind::kString:
        j[s.key] = v;
        break;
      case Kind::kList:
        j[s.key] = get_list(s.key);
        break;
    }
  }
  return j;
}

std::filesystem::path RunConfig::write_resolved(const std::filesystem::path& dir,
                                                const std::string& command) const {
  const auto path = dir / (command + ".config.json");
  io::write_text(path, to_json(command).dump(2) + "\n");
  return path;
}

}  // namespace ccrec::config
