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

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "aacl/tensor.hpp"

namespace aacl {

// Trainable tensor with its gradient accumulator.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() { grad.fill(0.0); }
};

using Mask = std::vector<bool>;

class Tape;

// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Computation record: nodes are appended in execution order, so the vector
// itself is a topological order and backward is a single reverse sweep.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var leaf(Tensor value);
  // Binds a parameter; repeated calls for the same parameter share one node.
  Var param(Parameter& parameter);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  // Gradient of the last backward() seed with respect to node `v`; zeros if unreached.
  Tensor grad(Var v) const;
  // Mutable accumulator, allocated on first use.
  Tensor& grad_buffer(std::size_t id);

  // Accumulates d(loss)/d(param) into every Parameter reached from `loss`.
  void backward(Var loss);

  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward, const char* op);

  std::size_t size() const noexcept { return nodes_.size(); }
  std::string op_name(std::size_t id) const { return nodes_[id].op; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    Parameter* parameter = nullptr;
    bool requires_grad = false;
    const char* op = "";
  };
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

// Clears every parameter gradient, then runs the reverse sweep. Parameters
// not reached from the loss keep a zero gradient.
void backward(Tape& tape, Var loss, std::span<Parameter* const> params);

// Recorded primitives. All forward results are checked for NaN/Inf.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_row(Var x, Var row);  // x[N×d] + row[d] on every row
Var mul_row(Var x, Var row);  // x[N×d] ⊙ row[d] on every row
Var gelu(Var x);
Var tanh(Var x);
Var masked_softmax(Var scores, const Mask& mask);  // [N] or row-wise over [R×N]
Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var slice_cols(Var x, std::size_t begin, std::size_t width);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var stack_rows(const std::vector<Var>& vectors);  // B vectors [d] -> [B×d]
Var mask_rows(Var x, const Mask& mask);            // zero rows where mask is false
Var gather_rows(Var table, std::span<const std::size_t> ids);
Var sum(Var x);
Var masked_mean_rows(Var x, const Mask& mask);     // [N×d] -> [d]
Var l2_normalize(Var v);
Var dot(Var a, Var b);
Var dropout(Var x, double rate, std::mt19937_64& rng);
// Mean over rows of -log softmax(row)[diagonal]; logits [B×B].
Var diagonal_cross_entropy(Var logits);

// Non-recording versions used by oracles and analysis.
Tensor masked_softmax_values(std::span<const double> scores, const Mask& mask);

constexpr double kLayerNormEps = 1e-5;

}  // namespace aacl
