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

#include "aacl/objective.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "aacl/error.hpp"

namespace aacl {

double similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionError("similarity: vector lengths differ");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

Var batch_classification_loss(const std::vector<Var>& composites, const std::vector<Var>& targets,
                              double temperature) {
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (composites.empty()) throw InvalidArgument("empty batch");
  if (composites.size() != targets.size()) throw DimensionError("composite and target counts differ");
  Var q = stack_rows(composites);
  Var t = stack_rows(targets);
  Var logits = scale(matmul(q, transpose(t)), 1.0 / temperature);
  return diagonal_cross_entropy(logits);
}

double batch_classification_loss_value(const Tensor& composites, const Tensor& targets, double temperature) {
  Tape tape;
  Var q = tape.constant(composites);
  Var t = tape.constant(targets);
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  return diagonal_cross_entropy(scale(matmul(q, transpose(t)), 1.0 / temperature)).value().item();
}

void TrainConfig::validate() const {
  sgd.validate();
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(temperature > 0.0)) throw InvalidArgument("temperature must be positive");
  if (pairs_per_reference < 1) throw InvalidArgument("pairs_per_reference must be at least 1");
}

std::size_t effective_batches(const TrainConfig& config, std::size_t train_items) {
  if (config.batches_per_epoch > 0) return config.batches_per_epoch;
  return std::max<std::size_t>(1, train_items / config.batch_size);
}

std::vector<TrainingExample> sample_batch(const Catalog& items, const AttributeSchema& schema, const DiffMode& mode,
                                          std::size_t batch_size, std::mt19937_64& rng,
                                          std::size_t pairs_per_reference) {
  std::vector<TrainingExample> batch;
  batch.reserve(batch_size);
  std::unordered_set<std::uint64_t> used;
  const std::size_t cap = kMaxPairAttempts * std::max<std::size_t>(batch_size, 1);
  for (std::size_t attempt = 0; batch.size() < batch_size; ++attempt) {
    if (attempt >= cap) {
      throw DomainError("cannot draw " + std::to_string(batch_size) + " pairs with distinct targets");
    }
    ItemPair pair = sample_pair(items, mode, rng);
    if (!used.insert(pair.target->id).second) continue;
    batch.push_back({pair.reference, pair.target, modification_text(*pair.reference, *pair.target, schema)});
    if (pairs_per_reference <= 1 || batch.size() == batch_size) continue;

    std::vector<const AttributeItem*> siblings;
    for (const AttributeItem& it : items) {
      if (&it != pair.reference && !used.count(it.id) && admissible_pair(*pair.reference, it, mode)) {
        siblings.push_back(&it);
      }
    }
    std::shuffle(siblings.begin(), siblings.end(), rng);
    for (std::size_t i = 0; i < siblings.size() && i + 1 < pairs_per_reference && batch.size() < batch_size; ++i) {
      used.insert(siblings[i]->id);
      batch.push_back({pair.reference, siblings[i], modification_text(*pair.reference, *siblings[i], schema)});
    }
  }
  return batch;
}

Var record_batch_loss(Tape& tape, Model& model, const std::vector<TrainingExample>& batch, double temperature,
                      const ComposeOptions& options) {
  std::vector<Var> composites, targets;
  composites.reserve(batch.size());
  targets.reserve(batch.size());
  for (const TrainingExample& ex : batch) {
    composites.push_back(model.embed_query(tape, *ex.reference, ex.text, options).embedding);
    targets.push_back(model.embed_image(tape, *ex.target));
  }
  return batch_classification_loss(composites, targets, temperature);
}

double batch_loss(Model& model, const std::vector<TrainingExample>& batch, double temperature, bool with_grad) {
  Tape tape;
  ComposeOptions options;
  options.trim_padding = true;
  Var loss = record_batch_loss(tape, model, batch, temperature, options);
  if (with_grad) {
    auto params = model.parameters();
    backward(tape, loss, params);
  }
  return loss.value().item();
}

EpochMetrics train_epoch(TrainState& state, const Catalog& train_items, const TrainConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const int epoch = state.epoch;
  // Per-epoch stream: resuming at epoch e needs nothing but (seed, e).
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);

  Model& model = state.model;
  auto params = model.parameters();
  ComposeOptions options;
  options.dropout = model.config.composition.dropout;
  options.rng = &rng;
  options.trim_padding = true;

  const std::size_t batches = effective_batches(config, train_items.size());
  double total = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    auto batch =
        sample_batch(train_items, model.schema, config.mode, config.batch_size, rng, config.pairs_per_reference);
    Tape tape;
    Var loss;
    try {
      loss = record_batch_loss(tape, model, batch, config.temperature, options);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b) + ": " + e.what());
    }
    const double value = loss.value().item();
    if (!std::isfinite(value)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(b));
    }
    backward(tape, loss, params);
    sgd_step(params, config.sgd, epoch);
    total += value;
  }

  EpochMetrics m;
  m.epoch = epoch;
  m.mean_loss = total / static_cast<double>(batches);
  m.lr = config.sgd.rate_at(epoch);
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  state.history.push_back(m);
  state.epoch = epoch + 1;
  return m;
}

}  // namespace aacl
