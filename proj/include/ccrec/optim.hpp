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

#ifndef CCREC_OPTIM_HPP_
#define CCREC_OPTIM_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "ccrec/tensor.hpp"

namespace ccrec::ad {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Added to the gradient as weight_decay * param (L2 penalty).
  double weight_decay = 1e-5;
};

struct AdamState {
  AdamOptions options;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::int64_t step = 0;
};

// One bias-corrected Adam update. grads[i] must match params[i] in size; an
// empty gradient counts as zero. Moments are allocated on first use.
void adam_step(std::span<Tensor> params,
               std::span<const std::vector<double>> grads, AdamState& state);

// Convenience owner of a parameter list and its Adam state. step() reads the
// gradients accumulated on the parameters by Tape::backward.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamOptions options = {});

  void step();
  void zero_grad();

  const AdamState& state() const { return state_; }
  std::span<Tensor> params() { return params_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
};

}  // namespace ccrec::ad

#endif  // CCREC_OPTIM_HPP_
