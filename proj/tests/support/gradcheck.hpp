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

// Central finite-difference oracle for the autodiff engine. The numeric side
// only ever calls the forward function with perturbed values, so it shares
// no code with any backward rule.

#ifndef CCREC_TESTS_GRADCHECK_HPP_
#define CCREC_TESTS_GRADCHECK_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ccrec/tensor.hpp"

namespace ccrec::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "input i, element j: analytic a vs numeric n"
};

// Relative error with a 1e-4 floor on the denominator so that gradients that
// are numerically zero compare in absolute terms.
inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-4});
}

// Checks d f / d inputs[i] for every input with requires_grad set.
// `f` must be a pure function of the input values.
inline GradCheckResult grad_check(
    const std::function<ad::Tensor(const std::vector<ad::Tensor>&)>& f,
    std::vector<ad::Tensor> inputs, double step = 1e-5) {
  for (auto& t : inputs) t.zero_grad();
  {
    ad::Tape tape;
    ad::Tensor loss = f(inputs);
    tape.backward(loss);
  }
  GradCheckResult res;
  ad::NoGradGuard no_grad;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    std::vector<double> analytic(inputs[i].numel(), 0.0);
    if (inputs[i].has_grad())
      std::copy(inputs[i].grad().begin(), inputs[i].grad().end(),
                analytic.begin());
    auto vals = inputs[i].mutable_values();
    for (std::size_t j = 0; j < vals.size(); ++j) {
      const double orig = vals[j];
      vals[j] = orig + step;
      const double up = f(inputs).item();
      vals[j] = orig - step;
      const double down = f(inputs).item();
      vals[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double e = rel_error(analytic[j], numeric);
      ++res.checked;
      if (e > res.max_rel_error || std::isnan(e)) {
        res.max_rel_error = std::isnan(e) ? 1e300 : e;
        res.worst = "input " + std::to_string(i) + ", element " +
                    std::to_string(j) + ": analytic " +
                    std::to_string(analytic[j]) + " vs numeric " +
                    std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace ccrec::testing

#endif  // CCREC_TESTS_GRADCHECK_HPP_
