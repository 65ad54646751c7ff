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
#include <vector>

#include "aacl/dataworld.hpp"
#include "aacl/model.hpp"
#include "aacl/objective.hpp"
#include "json.hpp"

namespace aacl {

// Every knob of a run, as flat JSON keys. Flags override file values; the
// canonical echo (to_json) is embedded in every artifact a run writes.
struct RunConfig {
  // world
  std::string schema = "desk";  // "desk", "toy" or a path to a schema JSON file
  std::uint64_t seed = 7;       // data seed: catalog, split, test queries
  std::size_t size = 2000;
  std::string k = "2";          // DiffMode for training pairs and test queries
  std::size_t n_queries = 2000;
  double val_fraction = 0.2;
  std::size_t min_category_items = 0;

  // model
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t blocks = 2;
  std::string variant = "additive_hadamard";
  double dropout = 0.0;
  std::size_t embed_dim = 64;
  std::vector<int> stages = {3, 4};
  std::size_t stage2_tokens = 4;
  std::size_t stage3_tokens = 4;
  std::size_t stage4_tokens = 4;
  std::size_t max_text_len = 24;
  std::string pool = "all";
  std::uint64_t init_seed = 1;

  // training
  std::size_t batch_size = 32;
  std::size_t batches_per_epoch = 0;
  std::size_t pairs_per_reference = 1;
  double lr = 0.035;
  double decay_factor = 0.1;
  std::size_t decay_every = 10;
  double temperature = 0.07;
  std::size_t epochs = 40;
  std::uint64_t train_seed = 11;

  void validate() const;

  // Unknown keys and ill-typed values are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::ordered_json to_json() const;

  // Assigns one key from its textual form (flag or C API value).
  void set(const std::string& key, const std::string& value);
  static const std::vector<std::string>& keys();

  AttributeSchema resolve_schema() const;
  DiffMode diff_mode() const { return DiffMode::parse(k); }
  ModelConfig model_config() const;
  TrainConfig train_config() const;
};

// Two-slot single-category world with eight items in total.
AttributeSchema toy_schema();

// Build identification compiled into the library.
const char* git_describe();
const char* library_version();

// {format_version, seed, git_describe, config} record used as artifact header.
nlohmann::ordered_json provenance(const RunConfig& config, int format_version);

}  // namespace aacl
