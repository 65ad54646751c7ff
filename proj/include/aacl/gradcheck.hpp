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

#include <functional>
#include <span>
#include <string>

#include "aacl/autodiff.hpp"

namespace aacl {

// Central difference (f(θ+εe_i) − f(θ−εe_i)) / 2ε for every coordinate of theta.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double step);

// Same, perturbing a parameter in place; the value is restored afterwards.
Tensor finite_difference_grad(const std::function<double()>& f, Parameter& param, double step);

// |a − n| / max(|a|, |n|, floor). The floor keeps round-off on vanishing
// gradients from reading as a large relative error.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;

  bool passed(double tolerance) const { return max_relative_error <= tolerance; }
};

// `loss` must evaluate the scalar objective from the current parameter
// values; `analytic` must leave d(loss)/d(param) in each Parameter::grad.
GradCheckReport check_gradients(const std::function<double()>& loss, const std::function<void()>& analytic,
                                std::span<Parameter* const> params, double step = 1e-5);

}  // namespace aacl
