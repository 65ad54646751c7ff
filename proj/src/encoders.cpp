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

#include "aacl/encoders.hpp"

#include <algorithm>
#include <cctype>
#include <istream>
#include <ostream>

#include "aacl/error.hpp"

namespace aacl {

Vocabulary::Vocabulary() {
  add("<pad>");
  add("<unk>");
}

Vocabulary Vocabulary::from_schema(const AttributeSchema& schema) {
  Vocabulary vocab;
  auto add_text = [&](const std::string& text) {
    for (const auto& w : normalize_words(text)) vocab.add(w);
  };
  for (const char* w : {"is", "and", "replace", "with"}) vocab.add(w);
  for (const auto& c : schema.categories) add_text(c);
  for (const auto& g : schema.genders) add_text(g);
  for (const auto& slot : schema.slots) {
    add_text(slot.name);
    for (const auto& v : slot.values) add_text(v);
  }
  return vocab;
}

std::size_t Vocabulary::add(const std::string& word) {
  if (auto it = ids_.find(word); it != ids_.end()) return it->second;
  if (word.find(',') != std::string::npos || word.find('\n') != std::string::npos) {
    throw InvalidArgument("vocabulary word may not contain ',' or newline: '" + word + "'");
  }
  words_.push_back(word);
  ids_.emplace(word, words_.size() - 1);
  return words_.size() - 1;
}

std::size_t Vocabulary::id(const std::string& word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnknown : it->second;
}

const std::string& Vocabulary::word(std::size_t id) const {
  if (id >= words_.size()) throw DomainError("vocabulary id " + std::to_string(id) + " out of range");
  return words_[id];
}

void Vocabulary::write(std::ostream& out) const {
  for (std::size_t i = 0; i < words_.size(); ++i) out << words_[i] << ',' << i << '\n';
}

Vocabulary Vocabulary::read(std::istream& in) {
  Vocabulary vocab;
  vocab.words_.clear();
  vocab.ids_.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw ParseError("vocabulary line " + std::to_string(line_no) + " lacks ','", 0);
    const std::string word = line.substr(0, comma);
    std::size_t id = 0;
    try {
      id = std::stoul(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ParseError("vocabulary line " + std::to_string(line_no) + " has a bad id", comma + 1);
    }
    if (id != vocab.words_.size()) throw ParseError("vocabulary ids must be dense and ascending", comma + 1);
    vocab.add(word);
  }
  if (vocab.size() < 2 || vocab.words_[kPad] != "<pad>" || vocab.words_[kUnknown] != "<unk>") {
    throw ParseError("vocabulary lacks reserved padding/unknown entries", 0);
  }
  return vocab;
}

std::vector<std::string> normalize_words(const std::string& text) {
  static const std::string separators = " \t\r\n,.;:!?\"()";
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (separators.find(c) != std::string::npos) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

TokenizedText tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
  if (max_len == 0) throw InvalidArgument("tokenize: max_len must be positive");
  TokenizedText out;
  out.ids.assign(max_len, Vocabulary::kPad);
  out.mask.assign(max_len, false);
  auto words = normalize_words(text);
  if (words.empty()) {
    out.ids[0] = Vocabulary::kUnknown;
    out.mask[0] = true;
    return out;
  }
  const std::size_t n = std::min(words.size(), max_len);
  for (std::size_t i = 0; i < n; ++i) {
    out.ids[i] = vocab.id(words[i]);
    out.mask[i] = true;
  }
  return out;
}

std::string detokenize(const TokenizedText& tokens, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    if (!tokens.mask[i]) continue;
    if (!out.empty()) out += ' ';
    out += vocab.word(tokens.ids[i]);
  }
  return out;
}

std::string to_string(PoolMode mode) {
  switch (mode) {
    case PoolMode::AllTokens: return "all";
    case PoolMode::ImageTokens: return "image";
    case PoolMode::FirstToken: return "first";
  }
  return "unknown";
}

PoolMode parse_pool_mode(const std::string& name) {
  if (name == "all") return PoolMode::AllTokens;
  if (name == "image") return PoolMode::ImageTokens;
  if (name == "first") return PoolMode::FirstToken;
  throw InvalidArgument("unknown pool mode '" + name + "'");
}

void EncoderConfig::validate() const {
  if (d < 2 || embed_dim == 0) throw InvalidArgument("encoder widths must be positive (d >= 2)");
  if (stages.empty()) throw InvalidArgument("at least one image stage must be selected");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    if (stages[i] < 2 || stages[i] > 4) throw InvalidArgument("image stages must be drawn from {2, 3, 4}");
    if (i > 0 && stages[i] <= stages[i - 1]) throw InvalidArgument("image stages must be ascending and distinct");
    if (tokens_for_stage(stages[i]) == 0) throw InvalidArgument("every selected stage needs at least one token");
  }
  if (max_text_len == 0) throw InvalidArgument("max_text_len must be positive");
}

std::size_t EncoderConfig::tokens_for_stage(int stage) const {
  switch (stage) {
    case 2: return stage2_tokens;
    case 3: return stage3_tokens;
    case 4: return stage4_tokens;
    default: throw InvalidArgument("no such image stage " + std::to_string(stage));
  }
}

std::size_t EncoderConfig::image_tokens() const {
  std::size_t n = 0;
  for (int s : stages) n += tokens_for_stage(s);
  return n;
}

ImageEncoderParams ImageEncoderParams::init(const EncoderConfig& config, const AttributeSchema& schema,
                                            std::mt19937_64& rng) {
  config.validate();
  const std::size_t e = config.embed_dim;
  ImageEncoderParams p;
  p.category_table = uniform_parameter("image.category", {schema.categories.size(), e}, 1, rng);
  p.gender_table = uniform_parameter("image.gender", {schema.genders.size(), e}, 1, rng);
  for (const auto& slot : schema.slots) {
    p.slot_tables.push_back(uniform_parameter("image.slot." + slot.name, {slot.values.size(), e}, 1, rng));
  }
  for (int stage : config.stages) {
    StageGenerator g;
    g.stage = stage;
    g.tokens = config.tokens_for_stage(stage);
    const std::string prefix = "image.stage" + std::to_string(stage);
    g.weight = uniform_parameter(prefix + "_w", {e, g.tokens * e}, e, rng);
    g.bias = constant_parameter(prefix + "_b", {g.tokens * e}, 0.0);
    p.generators.push_back(std::move(g));
  }
  p.proj_w = uniform_parameter("image.proj_w", {e, config.d}, e, rng);
  p.proj_b = constant_parameter("image.proj_b", {config.d}, 0.0);
  return p;
}

void ImageEncoderParams::collect(std::vector<Parameter*>& out) {
  out.push_back(&category_table);
  out.push_back(&gender_table);
  for (auto& t : slot_tables) out.push_back(&t);
  for (auto& g : generators) {
    out.push_back(&g.weight);
    out.push_back(&g.bias);
  }
  out.push_back(&proj_w);
  out.push_back(&proj_b);
}

TextEncoderParams TextEncoderParams::init(const EncoderConfig& config, std::size_t vocab_size, std::mt19937_64& rng) {
  config.validate();
  const std::size_t e = config.embed_dim;
  TextEncoderParams p;
  p.embedding = uniform_parameter("text.embedding", {vocab_size, e}, 1, rng);
  p.proj_w = uniform_parameter("text.proj_w", {e, config.d}, e, rng);
  p.proj_b = constant_parameter("text.proj_b", {config.d}, 0.0);
  return p;
}

void TextEncoderParams::collect(std::vector<Parameter*>& out) {
  out.push_back(&embedding);
  out.push_back(&proj_w);
  out.push_back(&proj_b);
}

TokenSequence encode_image(Tape& tape, const AttributeItem& item, ImageEncoderParams& params,
                           const std::vector<int>& stages) {
  if (item.values.size() != params.slot_tables.size()) {
    throw DomainError("encode_image: item has " + std::to_string(item.values.size()) + " slots, encoder expects " +
                      std::to_string(params.slot_tables.size()));
  }
  auto lookup = [&](Parameter& table, std::size_t index, const char* what) {
    if (index >= table.value.rows()) {
      throw DomainError(std::string("encode_image: unknown ") + what + " value " + std::to_string(index) +
                        " on item " + std::to_string(item.id));
    }
    const std::size_t ids[1] = {index};
    return gather_rows(tape.param(table), ids);
  };
  Var content = add(lookup(params.category_table, item.category, "category"),
                    lookup(params.gender_table, item.gender, "gender"));
  for (std::size_t s = 0; s < params.slot_tables.size(); ++s) {
    content = add(content, lookup(params.slot_tables[s], item.values[s], "attribute"));
  }
  const std::size_t e = params.proj_w.value.rows();
  std::vector<Var> blocks;
  int previous = 0;
  for (int stage : stages) {
    if (stage <= previous) throw InvalidArgument("encode_image: stages must be ascending and distinct");
    previous = stage;
    auto it = std::find_if(params.generators.begin(), params.generators.end(),
                           [stage](const StageGenerator& g) { return g.stage == stage; });
    if (it == params.generators.end()) {
      throw InvalidArgument("encode_image: no generator for stage " + std::to_string(stage));
    }
    Var raw = tanh(add_row(matmul(content, tape.param(it->weight)), tape.param(it->bias)));
    blocks.push_back(reshape(raw, {it->tokens, e}));
  }
  if (blocks.empty()) throw InvalidArgument("encode_image: no stages selected");
  Var tokens = blocks.size() == 1 ? blocks.front() : concat_rows(blocks);
  Var projected = add_row(matmul(tokens, tape.param(params.proj_w)), tape.param(params.proj_b));
  return TokenSequence{projected, Mask(projected.value().rows(), true)};
}

TokenSequence encode_text(Tape& tape, const TokenizedText& text, TextEncoderParams& params) {
  if (text.ids.size() != text.mask.size() || text.ids.empty()) {
    throw DimensionError("encode_text: ids and mask must be non-empty and equally long");
  }
  const std::size_t vocab = params.embedding.value.rows();
  for (auto id : text.ids) {
    if (id >= vocab) throw DomainError("encode_text: id " + std::to_string(id) + " outside vocabulary");
  }
  Var rows = gather_rows(tape.param(params.embedding), text.ids);
  Var projected = add_row(matmul(rows, tape.param(params.proj_w)), tape.param(params.proj_b));
  return TokenSequence{mask_rows(projected, text.mask), text.mask};
}

Var pool(const TokenSequence& seq, PoolMode mode, std::size_t image_tokens) {
  Mask mask = seq.valid;
  switch (mode) {
    case PoolMode::AllTokens:
      break;
    case PoolMode::ImageTokens:
      if (image_tokens == 0 || image_tokens > mask.size()) throw InvalidArgument("pool: bad image token count");
      std::fill(mask.begin() + static_cast<long>(image_tokens), mask.end(), false);
      break;
    case PoolMode::FirstToken: {
      auto first = std::find(mask.begin(), mask.end(), true);
      if (first != mask.end()) std::fill(first + 1, mask.end(), false);
      break;
    }
  }
  return l2_normalize(masked_mean_rows(seq.tokens, mask));
}

std::vector<TokenInfo> image_token_info(const EncoderConfig& config) {
  std::vector<TokenInfo> info;
  for (int stage : config.stages) {
    for (std::size_t i = 0; i < config.tokens_for_stage(stage); ++i) {
      info.push_back({TokenKind::Image, "s" + std::to_string(stage) + ":" + std::to_string(i)});
    }
  }
  return info;
}

}  // namespace aacl
