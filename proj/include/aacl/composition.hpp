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
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "aacl/autodiff.hpp"

namespace aacl {

// How the attention layer inside every composition block is built.
enum class Variant {
  AdditiveHadamard,  // o_i = h_i + F_o(c ⊙ h_i)
  DotProduct,        // scaled dot-product self-attention
  AdditiveSum,       // o_i = h_i + F_o(c + h_i)
};

std::string to_string(Variant variant);
Variant parse_variant(const std::string& name);

struct CompositionConfig {
  std::size_t d = 64;
  std::size_t num_heads = 4;
  std::size_t num_blocks = 2;
  Variant variant = Variant::AdditiveHadamard;
  double dropout = 0.0;

  void validate() const;
  std::size_t head_width() const { return d / num_heads; }
};

// N×d tokens plus the validity mask (false = padding, row held at zero).
struct TokenSequence {
  Var tokens;
  Mask valid;

  std::size_t length() const { return valid.size(); }
  std::size_t width() const { return tokens.value().cols(); }
  std::size_t valid_count() const;
};

struct AdditiveHeadParams {
  Parameter hidden_w, hidden_b;  // F_h
  Parameter context_w;           // w_h
  Parameter out_w, out_b;        // F_o
};

struct DotHeadParams {
  Parameter query_w, query_b;
  Parameter key_w, key_b;
  Parameter value_w, value_b;
};

struct BlockParams {
  Variant variant = Variant::AdditiveHadamard;
  std::vector<AdditiveHeadParams> additive_heads;
  std::vector<DotHeadParams> dot_heads;
  Parameter mix_w, mix_b;        // post-attention linear
  Parameter ff_in_w, ff_in_b;    // d -> 4d
  Parameter ff_out_w, ff_out_b;  // 4d -> d
  Parameter norm1_gamma, norm1_beta;
  Parameter norm2_gamma, norm2_beta;

  static BlockParams init(const CompositionConfig& config, std::size_t block_index, std::mt19937_64& rng);
  void collect(std::vector<Parameter*>& out);
  std::size_t num_heads() const;
};

struct CompositionStack {
  CompositionConfig config;
  std::vector<BlockParams> blocks;

  static CompositionStack init(const CompositionConfig& config, std::mt19937_64& rng);
  void collect(std::vector<Parameter*>& out);
};

// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Parameter uniform_parameter(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);
Parameter constant_parameter(std::string name, Shape shape, double value);

struct AttentionResult {
  Var context;  // c, [d_h]
  Var alpha;    // α, [N]
};

// α = masked_softmax(H·w / sqrt(d_h)), c = Σ α_i h_i. Linear in N.
AttentionResult additive_attention(Var hidden, Var context_w, const Mask& mask);

struct HeadOutput {
  Var tokens;     // [N×d_h], padded rows zero
  Tensor alpha;   // attention distribution recorded for the trace
  Tensor hidden;  // h (additive) or V (dot-product)
  Tensor context; // c (additive only)
};

HeadOutput additive_attention_layer(Tape& tape, Var input, AdditiveHeadParams& params, const Mask& mask,
                                    Variant variant = Variant::AdditiveHadamard);

// Softmax(QKᵀ/sqrt(d_h))·V over valid key positions. The recorded α is the
// attention each token receives, averaged over valid query rows.
HeadOutput dot_product_attention_layer(Tape& tape, Var input, DotHeadParams& params, const Mask& mask);

struct BlockResult {
  TokenSequence sequence;
  std::vector<HeadOutput> heads;
};

BlockResult compose_block(Tape& tape, const TokenSequence& input, BlockParams& params, Variant variant,
                          double dropout = 0.0, std::mt19937_64* rng = nullptr);

enum class TokenKind { Image, Text };

struct TokenInfo {
  TokenKind kind = TokenKind::Image;
  std::string label;
};

struct AttentionTrace {
  std::size_t num_blocks = 0;
  std::size_t num_heads = 0;
  Mask valid;
  std::vector<TokenInfo> tokens;
  // [block][head] -> α over all N positions
  std::vector<std::vector<Tensor>> alpha;
  // Populated only when internals are requested.
  std::vector<std::vector<Tensor>> hidden;
  std::vector<std::vector<Tensor>> context;

  // One JSON object per (block, head, token):
  // {"block","head","token_index","token_kind","token_label","alpha"}
  void write_jsonl(std::ostream& out) const;
};

struct ComposeOptions {
  bool keep_internals = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
  // Drop trailing text padding before composing. Padded rows never reach
  // valid outputs, so this only saves work; traces then omit the padding.
  bool trim_padding = false;
};

struct ComposeResult {
  TokenSequence sequence;
  AttentionTrace trace;
};

// φ = [φ_x, φ_t] (image tokens first) pushed through every block.
ComposeResult compose(Tape& tape, const TokenSequence& image, const TokenSequence& text, CompositionStack& stack,
                      const ComposeOptions& options = {});

}  // namespace aacl
