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

// Tensor checkpoints: `<base>.json` manifest plus `<base>.bin` blob.
//
// The manifest lists {name, shape, dtype, offset, nbytes} per tensor; the blob
// holds the values back to back as little-endian row-major floats. dtype is
// "f64" (exact round trip of training values) or "f32". Extra JSON sections
// (model config, tt_config, ...) ride along under "sections".

#ifndef CCREC_CHECKPOINT_HPP_
#define CCREC_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "ccrec/tensor.hpp"
#include "json.hpp"

namespace ccrec {

struct NamedTensor {
  std::string name;
  ad::Tensor tensor;
};

using ParamList = std::vector<NamedTensor>;

enum class DType { kF64, kF32 };

struct Checkpoint {
  ParamList tensors;
  nlohmann::json sections = nlohmann::json::object();

  // Throws ConfigError when absent.
  const ad::Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& base, const ParamList& tensors,
                     const nlohmann::json& sections = nlohmann::json::object(),
                     DType dtype = DType::kF64);
Checkpoint load_checkpoint(const std::filesystem::path& base);

// Copies values of `src` into same-named tensors of `dst` (shapes must agree).
void assign_params(const ParamList& dst, const Checkpoint& src);

std::filesystem::path manifest_path(const std::filesystem::path& base);
std::filesystem::path blob_path(const std::filesystem::path& base);

}  // namespace ccrec

#endif  // CCREC_CHECKPOINT_HPP_
