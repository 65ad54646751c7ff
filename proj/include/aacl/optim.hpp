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

#pragma once

#include <span>

#include "aacl/autodiff.hpp"

namespace aacl {

struct SgdConfig {
  double learning_rate = 0.035;
  double decay_factor = 0.1;
  int decay_every = 10;

  void validate() const;
  // learning_rate * decay_factor^floor(epoch / decay_every)
  double rate_at(int epoch) const;
};

// theta <- theta - rate_at(epoch) * grad for every parameter.
void sgd_step(std::span<Parameter* const> params, const SgdConfig& config, int epoch);

}  // namespace aacl
