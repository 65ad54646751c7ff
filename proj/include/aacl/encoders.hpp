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

#include <iosfwd>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "aacl/autodiff.hpp"
#include "aacl/composition.hpp"
#include "aacl/dataworld.hpp"

namespace aacl {

// word <-> id map. Ids are dense from 0; 0 is padding, 1 is unknown.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnknown = 1;

  Vocabulary();

  // Every word the caption and modification grammars can emit for `schema`.
  static Vocabulary from_schema(const AttributeSchema& schema);

  std::size_t add(const std::string& word);
  std::size_t id(const std::string& word) const;
  const std::string& word(std::size_t id) const;
  std::size_t size() const { return words_.size(); }

  // One "word,id" line per entry, ids ascending.
  void write(std::ostream& out) const;
  static Vocabulary read(std::istream& in);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Lowercased words; whitespace and the punctuation ,.;:!?"() separate words.
std::vector<std::string> normalize_words(const std::string& text);

struct TokenizedText {
  std::vector<std::size_t> ids;
  Mask mask;
};

// Pads/truncates to max_len. Text with no words yields one valid unknown token.
TokenizedText tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len);
std::string detokenize(const TokenizedText& tokens, const Vocabulary& vocab);

enum class PoolMode { AllTokens, ImageTokens, FirstToken };
std::string to_string(PoolMode mode);
PoolMode parse_pool_mode(const std::string& name);

struct EncoderConfig {
  std::size_t d = 64;
  std::size_t embed_dim = 64;
  std::vector<int> stages = {3, 4};  // subset of {2, 3, 4}
  std::size_t stage2_tokens = 4;
  std::size_t stage3_tokens = 4;
  std::size_t stage4_tokens = 4;
  std::size_t max_text_len = 24;
  PoolMode pool = PoolMode::AllTokens;

  void validate() const;
  std::size_t tokens_for_stage(int stage) const;
  std::size_t image_tokens() const;
};

struct StageGenerator {
  int stage = 4;
  std::size_t tokens = 4;
  Parameter weight;  // [embed_dim × tokens·embed_dim]
  Parameter bias;
};

struct ImageEncoderParams {
  Parameter category_table;
  Parameter gender_table;
  std::vector<Parameter> slot_tables;  // one [values × embed_dim] table per slot
  std::vector<StageGenerator> generators;
  Parameter proj_w, proj_b;

  static ImageEncoderParams init(const EncoderConfig& config, const AttributeSchema& schema, std::mt19937_64& rng);
  void collect(std::vector<Parameter*>& out);
};

struct TextEncoderParams {
  Parameter embedding;  // [vocab × embed_dim]
  Parameter proj_w, proj_b;

  static TextEncoderParams init(const EncoderConfig& config, std::size_t vocab_size, std::mt19937_64& rng);
  void collect(std::vector<Parameter*>& out);
};

// Attribute embeddings are summed into a content vector; each selected
// stage generator emits its token block from it; blocks are concatenated in
// ascending stage order and projected to width d.
TokenSequence encode_image(Tape& tape, const AttributeItem& item, ImageEncoderParams& params,
                           const std::vector<int>& stages);

TokenSequence encode_text(Tape& tape, const TokenizedText& text, TextEncoderParams& params);

// Mean over valid tokens followed by L2 normalization.
Var pool(const TokenSequence& seq, PoolMode mode = PoolMode::AllTokens, std::size_t image_tokens = 0);

// Stage and position label for every image token, e.g. "s3:0".
std::vector<TokenInfo> image_token_info(const EncoderConfig& config);

}  // namespace aacl
