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
#include <filesystem>
#include <string>
#include <vector>

#include "aacl/composition.hpp"
#include "aacl/dataworld.hpp"
#include "aacl/encoders.hpp"
#include "json.hpp"

namespace aacl {

struct ModelConfig {
  EncoderConfig encoder;
  CompositionConfig composition;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Encoders, projections and the composition stack. Query and target images
// go through the same image encoder.
struct Model {
  ModelConfig config;
  AttributeSchema schema;
  Vocabulary vocab;
  ImageEncoderParams image;
  TextEncoderParams text;
  CompositionStack stack;

  static Model init(const ModelConfig& config, const AttributeSchema& schema, std::uint64_t seed);

  // Canonical parameter order; used by the optimizer and the checkpoint.
  std::vector<Parameter*> parameters();

  TokenizedText tokenize(const std::string& text) const;

  struct Query {
    Var embedding;
    AttentionTrace trace;
    TokenSequence composed;
  };
  Query embed_query(Tape& tape, const AttributeItem& reference, const std::string& text,
                    const ComposeOptions& options = {});
  Var embed_image(Tape& tape, const AttributeItem& item);
  Var embed_text(Tape& tape, const std::string& text);

  // Convenience wrappers on a private tape.
  Tensor query_vector(const AttributeItem& reference, const std::string& text);
  Tensor image_vector(const AttributeItem& item);
  Tensor text_vector(const std::string& text);
};

// Checkpoint bundle: directory holding manifest.json (names, shapes, byte
// offsets, format version), params.bin (little-endian float64) and vocab.txt.
constexpr int kCheckpointFormatVersion = 1;

struct CheckpointMeta {
  int epoch = 0;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
};

void save_checkpoint(const std::filesystem::path& dir, Model& model, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  Model model;
  nlohmann::json manifest;
  int epoch = 0;
};
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace aacl
