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

#include "aacl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace aacl {

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& theta, double step) {
  Tensor probe = theta;
  Tensor grad(theta.shape());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = f(probe);
    probe[i] = original - step;
    const double down = f(probe);
    probe[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

Tensor finite_difference_grad(const std::function<double()>& f, Parameter& param, double step) {
  Tensor grad(param.value.shape());
  for (std::size_t i = 0; i < param.value.size(); ++i) {
    const double original = param.value[i];
    param.value[i] = original + step;
    const double up = f();
    param.value[i] = original - step;
    const double down = f();
    param.value[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckReport check_gradients(const std::function<double()>& loss, const std::function<void()>& analytic,
                                std::span<Parameter* const> params, double step) {
  analytic();
  std::vector<Tensor> analytic_grads;
  analytic_grads.reserve(params.size());
  for (Parameter* p : params) analytic_grads.push_back(p->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor numeric = finite_difference_grad(loss, *params[k], step);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      const double err = relative_error(analytic_grads[k][i], numeric[i]);
      ++report.coordinates;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        if (err >= report.max_relative_error) {
          report.max_relative_error = err;
          report.worst_parameter = params[k]->name;
          report.worst_index = i;
          report.worst_analytic = analytic_grads[k][i];
          report.worst_numeric = numeric[i];
        }
      }
    }
  }
  return report;
}

}  // namespace aacl
