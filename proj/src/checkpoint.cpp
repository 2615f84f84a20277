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

#include "ccrec/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include "ccrec/binary_io.hpp"
#include "ccrec/errors.hpp"

namespace ccrec {

namespace io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace io

std::filesystem::path manifest_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".json");
}

std::filesystem::path blob_path(const std::filesystem::path& base) {
  return std::filesystem::path(base.string() + ".bin");
}

const ad::Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.tensor;
  throw ConfigError("checkpoint has no tensor named '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void save_checkpoint(const std::filesystem::path& base, const ParamList& tensors,
                     const nlohmann::json& sections, DType dtype) {
  io::ByteWriter blob;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [name, t] : tensors) {
    const std::size_t offset = blob.bytes().size();
    for (double v : t.values()) {
      if (dtype == DType::kF64)
        blob.put_f64(v);
      else
        blob.put_f32(static_cast<float>(v));
    }
    entries.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"dtype", dtype == DType::kF64 ? "f64" : "f32"},
                       {"offset", offset},
                       {"nbytes", blob.bytes().size() - offset}});
  }
  nlohmann::json manifest = {
      {"format", "ccrec-tensors"},
      {"version", 1},
      {"blob", blob_path(base).filename().string()},
      {"tensors", entries},
      {"sections", sections},
  };
  io::write_file(blob_path(base), blob.bytes());
  io::write_text(manifest_path(base), manifest.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& base) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(io::read_text(manifest_path(base)));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint manifest " +
                      manifest_path(base).string() + ": " + e.what());
  }
  if (manifest.value("format", "") != "ccrec-tensors")
    throw FormatError("not a tensor manifest: " + manifest_path(base).string());
  if (manifest.value("version", 0) != 1)
    throw FormatError("unsupported checkpoint version in " +
                      manifest_path(base).string());
  const auto blob = io::read_file(blob_path(base));
  Checkpoint ck;
  ck.sections = manifest.value("sections", nlohmann::json::object());
  try {
    for (const auto& e : manifest.at("tensors")) {
      ad::Shape shape = e.at("shape").get<ad::Shape>();
      const std::string dtype = e.at("dtype");
      const std::size_t offset = e.at("offset");
      const std::size_t n = ad::shape_numel(shape);
      const std::size_t width = dtype == "f64" ? 8 : dtype == "f32" ? 4 : 0;
      if (width == 0) throw FormatError("unknown dtype '" + dtype + "'");
      if (offset + n * width > blob.size())
        throw FormatError("tensor '" + e.at("name").get<std::string>() +
                          "' extends past end of blob");
      io::ByteReader r(blob.data() + offset, n * width);
      std::vector<double> values(n);
      for (auto& v : values)
        v = width == 8 ? r.get_f64() : static_cast<double>(r.get_f32());
      ad::Tensor t = shape.empty()
                         ? ad::Tensor::scalar(values[0])
                         : ad::Tensor::from(std::move(shape), std::move(values));
      ck.tensors.push_back({e.at("name"), t});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad checkpoint manifest entry: " + std::string(e.what()));
  }
  return ck;
}

void assign_params(const ParamList& dst, const Checkpoint& src) {
  for (const auto& [name, t] : dst) {
    const ad::Tensor& s = src.get(name);
    if (s.shape() != t.shape())
      throw DimensionError("checkpoint tensor '" + name + "' has shape " +
                           ad::shape_str(s.shape()) + ", expected " +
                           ad::shape_str(t.shape()));
    ad::Tensor target = t;
    auto out = target.mutable_values();
    const auto in = s.values();
    std::copy(in.begin(), in.end(), out.begin());
  }
}

}  // namespace ccrec
