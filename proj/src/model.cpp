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

#include "aacl/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aacl/error.hpp"

namespace aacl {

void ModelConfig::validate() const {
  encoder.validate();
  composition.validate();
  if (encoder.d != composition.d) throw InvalidArgument("encoder and composition widths differ");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["d"] = composition.d;
  j["heads"] = composition.num_heads;
  j["blocks"] = composition.num_blocks;
  j["variant"] = to_string(composition.variant);
  j["dropout"] = composition.dropout;
  j["embed_dim"] = encoder.embed_dim;
  j["stages"] = encoder.stages;
  j["stage2_tokens"] = encoder.stage2_tokens;
  j["stage3_tokens"] = encoder.stage3_tokens;
  j["stage4_tokens"] = encoder.stage4_tokens;
  j["max_text_len"] = encoder.max_text_len;
  j["pool"] = to_string(encoder.pool);
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.composition.d = c.encoder.d = j.at("d").get<std::size_t>();
    c.composition.num_heads = j.at("heads").get<std::size_t>();
    c.composition.num_blocks = j.at("blocks").get<std::size_t>();
    c.composition.variant = parse_variant(j.at("variant").get<std::string>());
    c.composition.dropout = j.at("dropout").get<double>();
    c.encoder.embed_dim = j.at("embed_dim").get<std::size_t>();
    c.encoder.stages = j.at("stages").get<std::vector<int>>();
    c.encoder.stage2_tokens = j.at("stage2_tokens").get<std::size_t>();
    c.encoder.stage3_tokens = j.at("stage3_tokens").get<std::size_t>();
    c.encoder.stage4_tokens = j.at("stage4_tokens").get<std::size_t>();
    c.encoder.max_text_len = j.at("max_text_len").get<std::size_t>();
    c.encoder.pool = parse_pool_mode(j.at("pool").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

Model Model::init(const ModelConfig& config, const AttributeSchema& schema, std::uint64_t seed) {
  config.validate();
  schema.validate();
  std::mt19937_64 rng(seed);
  Model m;
  m.config = config;
  m.schema = schema;
  m.vocab = Vocabulary::from_schema(schema);
  m.image = ImageEncoderParams::init(config.encoder, schema, rng);
  m.text = TextEncoderParams::init(config.encoder, m.vocab.size(), rng);
  m.stack = CompositionStack::init(config.composition, rng);
  return m;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  image.collect(out);
  text.collect(out);
  stack.collect(out);
  return out;
}

TokenizedText Model::tokenize(const std::string& text) const {
  return aacl::tokenize(text, vocab, config.encoder.max_text_len);
}

Model::Query Model::embed_query(Tape& tape, const AttributeItem& reference, const std::string& text,
                                const ComposeOptions& options) {
  TokenizedText tokens = tokenize(text);
  if (options.trim_padding) {
    std::size_t n = 0;
    while (n < tokens.mask.size() && tokens.mask[n]) ++n;
    tokens.ids.resize(n);
    tokens.mask.resize(n);
  }
  TokenSequence image_seq = encode_image(tape, reference, image, config.encoder.stages);
  TokenSequence text_seq = encode_text(tape, tokens, this->text);
  ComposeResult composed = compose(tape, image_seq, text_seq, stack, options);
  composed.trace.tokens = image_token_info(config.encoder);
  for (std::size_t i = 0; i < tokens.ids.size(); ++i) {
    composed.trace.tokens.push_back({TokenKind::Text, tokens.mask[i] ? vocab.word(tokens.ids[i]) : "<pad>"});
  }
  Var pooled = pool(composed.sequence, config.encoder.pool, image_seq.length());
  return {pooled, std::move(composed.trace), composed.sequence};
}

Var Model::embed_image(Tape& tape, const AttributeItem& item) {
  return pool(encode_image(tape, item, image, config.encoder.stages));
}

Var Model::embed_text(Tape& tape, const std::string& text) { return pool(encode_text(tape, tokenize(text), this->text)); }

Tensor Model::query_vector(const AttributeItem& reference, const std::string& text) {
  Tape tape;
  return embed_query(tape, reference, text).embedding.value();
}

Tensor Model::image_vector(const AttributeItem& item) {
  Tape tape;
  return embed_image(tape, item).value();
}

Tensor Model::text_vector(const std::string& text) {
  Tape tape;
  return embed_text(tape, text).value();
}

namespace {

void write_le_doubles(std::ostream& out, std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double read_le_double(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, Model& model, const CheckpointMeta& meta) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format_version"] = kCheckpointFormatVersion;
  manifest["schema_hash"] = model.schema.hash();
  manifest["schema"] = model.schema.to_json();
  manifest["epoch"] = meta.epoch;
  manifest["model"] = model.config.to_json();
  manifest["vocab_file"] = "vocab.txt";
  manifest["blob_file"] = "params.bin";
  manifest["params"] = nlohmann::ordered_json::array();

  std::ofstream blob(dir / "params.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw IoError("cannot write " + (dir / "params.bin").string());
  std::uint64_t offset = 0;
  for (Parameter* p : model.parameters()) {
    manifest["params"].push_back({{"name", p->name}, {"shape", p->value.shape()}, {"offset", offset}});
    write_le_doubles(blob, p->value.values());
    offset += p->value.size() * 8;
  }
  for (auto it = meta.extra.begin(); it != meta.extra.end(); ++it) manifest[it.key()] = it.value();

  std::ofstream vocab(dir / "vocab.txt", std::ios::trunc);
  model.vocab.write(vocab);
  std::ofstream man(dir / "manifest.json", std::ios::trunc);
  man << manifest.dump(2) << '\n';
  if (!blob || !vocab || !man) throw IoError("failed writing checkpoint bundle " + dir.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest.json");
  if (!man) throw IoError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(man);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint manifest: ") + e.what(), e.byte);
  }
  if (manifest.value("format_version", 0) != kCheckpointFormatVersion) {
    throw MismatchError("checkpoint format version " + manifest.value("format_version", nlohmann::json()).dump() +
                        " is not supported");
  }
  if (!manifest.contains("schema")) throw ParseError("checkpoint manifest lacks the schema", 0);
  AttributeSchema schema = AttributeSchema::from_json(manifest["schema"]);
  if (schema.hash() != manifest.value("schema_hash", "")) throw MismatchError("checkpoint schema hash mismatch");

  LoadedCheckpoint out;
  out.model = Model::init(ModelConfig::from_json(manifest.at("model")), schema, 0);
  out.epoch = manifest.value("epoch", 0);
  {
    std::ifstream vocab(dir / manifest.value("vocab_file", "vocab.txt"));
    if (!vocab) throw IoError("cannot open checkpoint vocabulary");
    out.model.vocab = Vocabulary::read(vocab);
  }
  if (out.model.vocab.size() != out.model.text.embedding.value.rows()) {
    throw MismatchError("checkpoint vocabulary size does not match the text embedding table");
  }

  std::ifstream blob(dir / manifest.value("blob_file", "params.bin"), std::ios::binary);
  if (!blob) throw IoError("cannot open checkpoint blob");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());

  auto params = out.model.parameters();
  const auto& entries = manifest.at("params");
  if (entries.size() != params.size()) throw MismatchError("checkpoint parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = entries[i];
    if (e.at("name").get<std::string>() != params[i]->name) {
      throw MismatchError("checkpoint parameter " + std::to_string(i) + " is " + e.at("name").get<std::string>() +
                          ", expected " + params[i]->name);
    }
    if (e.at("shape").get<Shape>() != params[i]->value.shape()) {
      throw MismatchError("checkpoint shape mismatch for " + params[i]->name);
    }
    const auto offset = e.at("offset").get<std::uint64_t>();
    const std::size_t n = params[i]->value.size();
    if (offset + n * 8 > bytes.size()) throw MismatchError("checkpoint blob too short for " + params[i]->name);
    for (std::size_t k = 0; k < n; ++k) params[i]->value[k] = read_le_double(bytes.data() + offset + k * 8);
    params[i]->grad = Tensor(params[i]->value.shape());
  }
  out.manifest = std::move(manifest);
  return out;
}

}  // namespace aacl
