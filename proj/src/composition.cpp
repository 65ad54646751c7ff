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

#include "aacl/composition.hpp"

#include <cmath>
#include <ostream>

#include "json.hpp"

#include "aacl/error.hpp"

namespace aacl {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::AdditiveHadamard: return "additive_hadamard";
    case Variant::DotProduct: return "dot_product";
    case Variant::AdditiveSum: return "additive_sum";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "additive_hadamard") return Variant::AdditiveHadamard;
  if (name == "dot_product") return Variant::DotProduct;
  if (name == "additive_sum") return Variant::AdditiveSum;
  throw InvalidArgument("unknown attention variant '" + name + "'");
}

void CompositionConfig::validate() const {
  if (d == 0) throw InvalidArgument("d must be positive");
  if (num_heads == 0 || d % num_heads != 0) {
    throw InvalidArgument("num_heads must divide d (d=" + std::to_string(d) + ", heads=" +
                          std::to_string(num_heads) + ")");
  }
  if (d < 2) throw InvalidArgument("d must be at least 2 for layer normalization");
  if (dropout < 0.0 || dropout >= 1.0) throw InvalidArgument("dropout must lie in [0, 1)");
}

std::size_t TokenSequence::valid_count() const {
  std::size_t n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

Parameter uniform_parameter(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor value(std::move(shape));
  for (double& v : value.values()) v = dist(rng);
  return Parameter(std::move(name), std::move(value));
}

Parameter constant_parameter(std::string name, Shape shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return Parameter(std::move(name), std::move(t));
}

BlockParams BlockParams::init(const CompositionConfig& config, std::size_t block_index, std::mt19937_64& rng) {
  config.validate();
  const std::size_t d = config.d, dh = config.head_width();
  const std::string prefix = "block" + std::to_string(block_index) + ".";
  BlockParams p;
  p.variant = config.variant;
  for (std::size_t h = 0; h < config.num_heads; ++h) {
    const std::string hp = prefix + "head" + std::to_string(h) + ".";
    if (config.variant == Variant::DotProduct) {
      DotHeadParams head;
      head.query_w = uniform_parameter(hp + "query_w", {dh, dh}, dh, rng);
      head.query_b = constant_parameter(hp + "query_b", {dh}, 0.0);
      head.key_w = uniform_parameter(hp + "key_w", {dh, dh}, dh, rng);
      head.key_b = constant_parameter(hp + "key_b", {dh}, 0.0);
      head.value_w = uniform_parameter(hp + "value_w", {dh, dh}, dh, rng);
      head.value_b = constant_parameter(hp + "value_b", {dh}, 0.0);
      p.dot_heads.push_back(std::move(head));
    } else {
      AdditiveHeadParams head;
      head.hidden_w = uniform_parameter(hp + "hidden_w", {dh, dh}, dh, rng);
      head.hidden_b = constant_parameter(hp + "hidden_b", {dh}, 0.0);
      head.context_w = uniform_parameter(hp + "context_w", {dh}, dh, rng);
      head.out_w = uniform_parameter(hp + "out_w", {dh, dh}, dh, rng);
      head.out_b = constant_parameter(hp + "out_b", {dh}, 0.0);
      p.additive_heads.push_back(std::move(head));
    }
  }
  p.mix_w = uniform_parameter(prefix + "mix_w", {d, d}, d, rng);
  p.mix_b = constant_parameter(prefix + "mix_b", {d}, 0.0);
  p.ff_in_w = uniform_parameter(prefix + "ff_in_w", {d, 4 * d}, d, rng);
  p.ff_in_b = constant_parameter(prefix + "ff_in_b", {4 * d}, 0.0);
  p.ff_out_w = uniform_parameter(prefix + "ff_out_w", {4 * d, d}, 4 * d, rng);
  p.ff_out_b = constant_parameter(prefix + "ff_out_b", {d}, 0.0);
  p.norm1_gamma = constant_parameter(prefix + "norm1_gamma", {d}, 1.0);
  p.norm1_beta = constant_parameter(prefix + "norm1_beta", {d}, 0.0);
  p.norm2_gamma = constant_parameter(prefix + "norm2_gamma", {d}, 1.0);
  p.norm2_beta = constant_parameter(prefix + "norm2_beta", {d}, 0.0);
  return p;
}

void BlockParams::collect(std::vector<Parameter*>& out) {
  for (auto& h : additive_heads) {
    for (Parameter* q : {&h.hidden_w, &h.hidden_b, &h.context_w, &h.out_w, &h.out_b}) out.push_back(q);
  }
  for (auto& h : dot_heads) {
    for (Parameter* q : {&h.query_w, &h.query_b, &h.key_w, &h.key_b, &h.value_w, &h.value_b}) out.push_back(q);
  }
  for (Parameter* q : {&mix_w, &mix_b, &ff_in_w, &ff_in_b, &ff_out_w, &ff_out_b, &norm1_gamma, &norm1_beta,
                       &norm2_gamma, &norm2_beta}) {
    out.push_back(q);
  }
}

std::size_t BlockParams::num_heads() const { return additive_heads.size() + dot_heads.size(); }

CompositionStack CompositionStack::init(const CompositionConfig& config, std::mt19937_64& rng) {
  config.validate();
  CompositionStack stack;
  stack.config = config;
  for (std::size_t b = 0; b < config.num_blocks; ++b) stack.blocks.push_back(BlockParams::init(config, b, rng));
  return stack;
}

void CompositionStack::collect(std::vector<Parameter*>& out) {
  for (auto& b : blocks) b.collect(out);
}

AttentionResult additive_attention(Var hidden, Var context_w, const Mask& mask) {
  const Tensor& h = hidden.value();
  if (h.rank() != 2 || context_w.value().shape() != Shape{h.cols()}) {
    throw DimensionError("additive_attention: hidden " + shape_string(h.shape()) + " vs context weight " +
                         shape_string(context_w.value().shape()));
  }
  if (mask.size() != h.rows()) throw DimensionError("additive_attention: mask length mismatch");
  const std::size_t n = h.rows(), dh = h.cols();
  Var scores = reshape(matmul(hidden, reshape(context_w, {dh, 1})), {n});
  scores = scale(scores, 1.0 / std::sqrt(static_cast<double>(dh)));
  Var alpha = masked_softmax(scores, mask);
  Var context = reshape(matmul(reshape(alpha, {1, n}), hidden), {dh});
  return {context, alpha};
}

HeadOutput additive_attention_layer(Tape& tape, Var input, AdditiveHeadParams& params, const Mask& mask,
                                    Variant variant) {
  if (variant == Variant::DotProduct) throw InvalidArgument("additive layer cannot run the dot-product variant");
  Var hidden = mask_rows(add_row(matmul(input, tape.param(params.hidden_w)), tape.param(params.hidden_b)), mask);
  AttentionResult att = additive_attention(hidden, tape.param(params.context_w), mask);
  Var mixed = variant == Variant::AdditiveHadamard ? mul_row(hidden, att.context) : add_row(hidden, att.context);
  Var transformed = add_row(matmul(mixed, tape.param(params.out_w)), tape.param(params.out_b));
  Var out = mask_rows(add(hidden, transformed), mask);
  return {out, att.alpha.value(), hidden.value(), att.context.value()};
}

HeadOutput dot_product_attention_layer(Tape& tape, Var input, DotHeadParams& params, const Mask& mask) {
  const std::size_t n = input.value().rows();
  if (mask.size() != n) throw DimensionError("dot_product_attention_layer: mask length mismatch");
  const std::size_t dh = input.value().cols();
  Var q = add_row(matmul(input, tape.param(params.query_w)), tape.param(params.query_b));
  Var k = add_row(matmul(input, tape.param(params.key_w)), tape.param(params.key_b));
  Var v = mask_rows(add_row(matmul(input, tape.param(params.value_w)), tape.param(params.value_b)), mask);
  Var scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(dh)));
  Var weights = masked_softmax(scores, mask);
  Var out = mask_rows(matmul(weights, v), mask);

  const Tensor& w = weights.value();
  Tensor received(Shape{n});
  std::size_t rows = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    ++rows;
    for (std::size_t j = 0; j < n; ++j) received[j] += w(i, j);
  }
  for (double& a : received.values()) a /= static_cast<double>(rows);
  return {out, std::move(received), v.value(), Tensor()};
}

BlockResult compose_block(Tape& tape, const TokenSequence& input, BlockParams& params, Variant variant,
                          double dropout_rate, std::mt19937_64* rng) {
  const Tensor& x = input.tokens.value();
  if (x.rank() != 2 || x.rows() != input.valid.size()) {
    throw DimensionError("compose_block: token/mask shape mismatch");
  }
  if (params.variant != variant ||
      (variant == Variant::DotProduct ? params.dot_heads.empty() : params.additive_heads.empty())) {
    throw InvalidArgument("compose_block: parameters were built for " + to_string(params.variant) +
                          ", requested " + to_string(variant));
  }
  const std::size_t d = x.cols();
  if (params.mix_w.value.rows() != d) throw DimensionError("compose_block: width does not match parameters");
  const std::size_t heads = params.num_heads();
  const std::size_t dh = d / heads;

  BlockResult result;
  std::vector<Var> head_tokens;
  for (std::size_t h = 0; h < heads; ++h) {
    Var slice = heads == 1 ? input.tokens : slice_cols(input.tokens, h * dh, dh);
    HeadOutput out = variant == Variant::DotProduct
                         ? dot_product_attention_layer(tape, slice, params.dot_heads[h], input.valid)
                         : additive_attention_layer(tape, slice, params.additive_heads[h], input.valid, variant);
    head_tokens.push_back(out.tokens);
    result.heads.push_back(std::move(out));
  }
  Var joined = heads == 1 ? head_tokens.front() : concat_cols(head_tokens);
  Var mixed = add_row(matmul(joined, tape.param(params.mix_w)), tape.param(params.mix_b));
  Var x1 = layer_norm(add(input.tokens, mixed), tape.param(params.norm1_gamma), tape.param(params.norm1_beta),
                      kLayerNormEps);
  Var inner = gelu(add_row(matmul(x1, tape.param(params.ff_in_w)), tape.param(params.ff_in_b)));
  Var ff = add_row(matmul(inner, tape.param(params.ff_out_w)), tape.param(params.ff_out_b));
  Var x2 = layer_norm(add(x1, ff), tape.param(params.norm2_gamma), tape.param(params.norm2_beta), kLayerNormEps);
  if (dropout_rate > 0.0) {
    if (rng == nullptr) throw InvalidArgument("compose_block: dropout requires a random generator");
    x2 = dropout(x2, dropout_rate, *rng);
  }
  result.sequence = TokenSequence{mask_rows(x2, input.valid), input.valid};
  return result;
}

void AttentionTrace::write_jsonl(std::ostream& out) const {
  for (std::size_t b = 0; b < num_blocks; ++b) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      const Tensor& a = alpha[b][h];
      for (std::size_t i = 0; i < a.size(); ++i) {
        nlohmann::ordered_json row;
        row["block"] = b;
        row["head"] = h;
        row["token_index"] = i;
        row["token_kind"] = i < tokens.size() && tokens[i].kind == TokenKind::Text ? "text" : "image";
        row["token_label"] = i < tokens.size() ? tokens[i].label : "";
        row["alpha"] = a[i];
        out << row.dump() << '\n';
      }
    }
  }
}

ComposeResult compose(Tape& tape, const TokenSequence& image, const TokenSequence& text, CompositionStack& stack,
                      const ComposeOptions& options) {
  if (image.width() != text.width()) {
    throw DimensionError("compose: image width " + std::to_string(image.width()) + " != text width " +
                         std::to_string(text.width()));
  }
  if (image.width() != stack.config.d) {
    throw DimensionError("compose: token width " + std::to_string(image.width()) + " != model width " +
                         std::to_string(stack.config.d));
  }
  Mask valid = image.valid;
  valid.insert(valid.end(), text.valid.begin(), text.valid.end());
  ComposeResult result;
  result.sequence = TokenSequence{concat_rows({image.tokens, text.tokens}), valid};
  result.trace.num_blocks = stack.blocks.size();
  result.trace.num_heads = stack.config.num_heads;
  result.trace.valid = valid;
  for (auto& block : stack.blocks) {
    BlockResult br = compose_block(tape, result.sequence, block, stack.config.variant, options.dropout, options.rng);
    result.sequence = br.sequence;
    std::vector<Tensor> alphas, hiddens, contexts;
    for (auto& head : br.heads) {
      alphas.push_back(std::move(head.alpha));
      if (options.keep_internals) {
        hiddens.push_back(std::move(head.hidden));
        contexts.push_back(std::move(head.context));
      }
    }
    result.trace.alpha.push_back(std::move(alphas));
    if (options.keep_internals) {
      result.trace.hidden.push_back(std::move(hiddens));
      result.trace.context.push_back(std::move(contexts));
    }
  }
  return result;
}

}  // namespace aacl
