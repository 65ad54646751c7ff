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
#include <string>
#include <span>
#include <vector>

#include "aacl/dataworld.hpp"
#include "aacl/model.hpp"
#include "aacl/optim.hpp"

namespace aacl {

// κ(u, v) = u·v; cosine similarity for unit-norm inputs.
double similarity(std::span<const double> u, std::span<const double> v);

// In-batch softmax cross-entropy with the matched pair on the diagonal:
// L = (1/B) Σ_i −log( exp(κ(q_i, t_i)/τ) / Σ_j exp(κ(q_i, t_j)/τ) ).
Var batch_classification_loss(const std::vector<Var>& composites, const std::vector<Var>& targets,
                              double temperature);

// Same value without recording: rows of `composites` and `targets` are the
// pooled embeddings.
double batch_classification_loss_value(const Tensor& composites, const Tensor& targets, double temperature);

struct TrainConfig {
  SgdConfig sgd;
  std::size_t batch_size = 32;
  std::size_t batches_per_epoch = 0;  // 0: one pass worth of training items
  double temperature = 0.07;
  DiffMode mode = DiffMode::exactly(2);
  // Each uniformly drawn pair is joined by up to this many further pairs
  // sharing its reference (1 = plain uniform pairs). Siblings can only be
  // told apart through their modification texts.
  std::size_t pairs_per_reference = 1;
  std::uint64_t seed = 11;

  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct TrainState {
  Model model;
  int epoch = 0;
  std::vector<EpochMetrics> history;
};

struct TrainingExample {
  const AttributeItem* reference = nullptr;
  const AttributeItem* target = nullptr;
  std::string text;
};

// B admissible pairs with pairwise distinct targets drawn from `items`.
std::vector<TrainingExample> sample_batch(const Catalog& items, const AttributeSchema& schema, const DiffMode& mode,
                                          std::size_t batch_size, std::mt19937_64& rng,
                                          std::size_t pairs_per_reference = 1);

// Records the full forward pass of one batch on `tape` and returns the loss.
Var record_batch_loss(Tape& tape, Model& model, const std::vector<TrainingExample>& batch, double temperature,
                      const ComposeOptions& options = {});

// Loss of one batch on a private tape; fills parameter gradients when `with_grad`.
double batch_loss(Model& model, const std::vector<TrainingExample>& batch, double temperature, bool with_grad);

// One epoch of compose → pool → loss → backward → SGD. Batches are drawn
// from a generator seeded by (seed, epoch), so a resumed run replays the
// uninterrupted trajectory exactly.
EpochMetrics train_epoch(TrainState& state, const Catalog& train_items, const TrainConfig& config);

// Number of batches per epoch when the config leaves it at 0.
std::size_t effective_batches(const TrainConfig& config, std::size_t train_items);

}  // namespace aacl
