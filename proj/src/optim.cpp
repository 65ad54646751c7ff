/* Copyright 2026 The aacl-lab Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "aacl/optim.hpp"

#include <cmath>

#include "aacl/error.hpp"

namespace aacl {

void SgdConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be a finite non-negative number");
  }
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw InvalidArgument("decay_factor must lie in (0, 1]");
  if (decay_every < 1) throw InvalidArgument("decay_every must be a positive number of epochs");
}

double SgdConfig::rate_at(int epoch) const {
  if (epoch < 0) throw InvalidArgument("epoch must be non-negative");
  return learning_rate * std::pow(decay_factor, epoch / decay_every);
}

void sgd_step(std::span<Parameter* const> params, const SgdConfig& config, int epoch) {
  const double rate = config.rate_at(epoch);
  for (Parameter* p : params) {
    if (p->grad.shape() != p->value.shape()) {
      throw DimensionError("sgd_step: gradient shape mismatch for " + p->name);
    }
    auto theta = p->value.values();
    auto g = p->grad.values();
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= rate * g[i];
  }
}

}  // namespace aacl
