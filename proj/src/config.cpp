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

#include "aacl/config.hpp"

#include <charconv>
#include <fstream>

#include "aacl/error.hpp"

#ifndef AACL_GIT_DESCRIBE
#define AACL_GIT_DESCRIBE "unknown"
#endif
#ifndef AACL_VERSION
#define AACL_VERSION "0.0.0"
#endif

namespace aacl {

const char* git_describe() { return AACL_GIT_DESCRIBE; }
const char* library_version() { return AACL_VERSION; }

AttributeSchema toy_schema() {
  AttributeSchema s;
  s.slots = {{"color", {"Navy", "Black", "White", "Red"}}, {"sleeve", {"Short", "Long"}}};
  s.categories = {"Shirt"};
  s.genders = {"Female"};
  return s;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = {
      "schema", "seed", "size", "k", "n_queries", "val_fraction", "min_category_items",
      "d", "heads", "blocks", "variant", "dropout", "embed_dim", "stages", "stage2_tokens", "stage3_tokens",
      "stage4_tokens", "max_text_len", "pool", "init_seed",
      "batch_size", "batches_per_epoch", "pairs_per_reference", "lr", "decay_factor", "decay_every",
      "temperature", "epochs", "train_seed"};
  return k;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["schema"] = schema;
  j["seed"] = seed;
  j["size"] = size;
  j["k"] = k;
  j["n_queries"] = n_queries;
  j["val_fraction"] = val_fraction;
  j["min_category_items"] = min_category_items;
  j["d"] = d;
  j["heads"] = heads;
  j["blocks"] = blocks;
  j["variant"] = variant;
  j["dropout"] = dropout;
  j["embed_dim"] = embed_dim;
  j["stages"] = stages;
  j["stage2_tokens"] = stage2_tokens;
  j["stage3_tokens"] = stage3_tokens;
  j["stage4_tokens"] = stage4_tokens;
  j["max_text_len"] = max_text_len;
  j["pool"] = pool;
  j["init_seed"] = init_seed;
  j["batch_size"] = batch_size;
  j["batches_per_epoch"] = batches_per_epoch;
  j["pairs_per_reference"] = pairs_per_reference;
  j["lr"] = lr;
  j["decay_factor"] = decay_factor;
  j["decay_every"] = decay_every;
  j["temperature"] = temperature;
  j["epochs"] = epochs;
  j["train_seed"] = train_seed;
  return j;
}

namespace {

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || text.empty()) {
    throw InvalidArgument("config key '" + key + "': cannot parse '" + text + "'");
  }
  return value;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string part = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    out.push_back(parse_number<int>(key, part));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  const auto& known = keys();
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw InvalidArgument("unknown config key '" + it.key() + "'");
    }
  }
  RunConfig c;
  read_key(j, "schema", c.schema);
  read_key(j, "seed", c.seed);
  read_key(j, "size", c.size);
  read_key(j, "k", c.k);
  read_key(j, "n_queries", c.n_queries);
  read_key(j, "val_fraction", c.val_fraction);
  read_key(j, "min_category_items", c.min_category_items);
  read_key(j, "d", c.d);
  read_key(j, "heads", c.heads);
  read_key(j, "blocks", c.blocks);
  read_key(j, "variant", c.variant);
  read_key(j, "dropout", c.dropout);
  read_key(j, "embed_dim", c.embed_dim);
  read_key(j, "stages", c.stages);
  read_key(j, "stage2_tokens", c.stage2_tokens);
  read_key(j, "stage3_tokens", c.stage3_tokens);
  read_key(j, "stage4_tokens", c.stage4_tokens);
  read_key(j, "max_text_len", c.max_text_len);
  read_key(j, "pool", c.pool);
  read_key(j, "init_seed", c.init_seed);
  read_key(j, "batch_size", c.batch_size);
  read_key(j, "batches_per_epoch", c.batches_per_epoch);
  read_key(j, "pairs_per_reference", c.pairs_per_reference);
  read_key(j, "lr", c.lr);
  read_key(j, "decay_factor", c.decay_factor);
  read_key(j, "decay_every", c.decay_every);
  read_key(j, "temperature", c.temperature);
  read_key(j, "epochs", c.epochs);
  read_key(j, "train_seed", c.train_seed);
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config " + path + ": " + e.what(), e.byte);
  }
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "schema") schema = value;
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, value);
  else if (key == "size") size = parse_number<std::size_t>(key, value);
  else if (key == "k") k = value;
  else if (key == "n_queries") n_queries = parse_number<std::size_t>(key, value);
  else if (key == "val_fraction") val_fraction = parse_number<double>(key, value);
  else if (key == "min_category_items") min_category_items = parse_number<std::size_t>(key, value);
  else if (key == "d") d = parse_number<std::size_t>(key, value);
  else if (key == "heads") heads = parse_number<std::size_t>(key, value);
  else if (key == "blocks") blocks = parse_number<std::size_t>(key, value);
  else if (key == "variant") variant = value;
  else if (key == "dropout") dropout = parse_number<double>(key, value);
  else if (key == "embed_dim") embed_dim = parse_number<std::size_t>(key, value);
  else if (key == "stages") stages = parse_int_list(key, value);
  else if (key == "stage2_tokens") stage2_tokens = parse_number<std::size_t>(key, value);
  else if (key == "stage3_tokens") stage3_tokens = parse_number<std::size_t>(key, value);
  else if (key == "stage4_tokens") stage4_tokens = parse_number<std::size_t>(key, value);
  else if (key == "max_text_len") max_text_len = parse_number<std::size_t>(key, value);
  else if (key == "pool") pool = value;
  else if (key == "init_seed") init_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "batch_size") batch_size = parse_number<std::size_t>(key, value);
  else if (key == "batches_per_epoch") batches_per_epoch = parse_number<std::size_t>(key, value);
  else if (key == "pairs_per_reference") pairs_per_reference = parse_number<std::size_t>(key, value);
  else if (key == "lr") lr = parse_number<double>(key, value);
  else if (key == "decay_factor") decay_factor = parse_number<double>(key, value);
  else if (key == "decay_every") decay_every = parse_number<std::size_t>(key, value);
  else if (key == "temperature") temperature = parse_number<double>(key, value);
  else if (key == "epochs") epochs = parse_number<std::size_t>(key, value);
  else if (key == "train_seed") train_seed = parse_number<std::uint64_t>(key, value);
  else throw InvalidArgument("unknown config key '" + key + "'");
}

AttributeSchema RunConfig::resolve_schema() const {
  AttributeSchema s;
  if (schema == "desk") {
    s = AttributeSchema::desk_default();
  } else if (schema == "toy") {
    s = toy_schema();
  } else {
    std::ifstream in(schema);
    if (!in) throw IoError("cannot open schema file " + schema);
    try {
      s = AttributeSchema::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("schema " + schema + ": " + e.what(), e.byte);
    }
  }
  s.validate();
  return s;
}

ModelConfig RunConfig::model_config() const {
  ModelConfig m;
  m.composition.d = m.encoder.d = d;
  m.composition.num_heads = heads;
  m.composition.num_blocks = blocks;
  m.composition.variant = parse_variant(variant);
  m.composition.dropout = dropout;
  m.encoder.embed_dim = embed_dim;
  m.encoder.stages = stages;
  m.encoder.stage2_tokens = stage2_tokens;
  m.encoder.stage3_tokens = stage3_tokens;
  m.encoder.stage4_tokens = stage4_tokens;
  m.encoder.max_text_len = max_text_len;
  m.encoder.pool = parse_pool_mode(pool);
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.sgd.learning_rate = lr;
  t.sgd.decay_factor = decay_factor;
  t.sgd.decay_every = static_cast<int>(decay_every);
  t.batch_size = batch_size;
  t.batches_per_epoch = batches_per_epoch;
  t.pairs_per_reference = pairs_per_reference;
  t.temperature = temperature;
  t.mode = diff_mode();
  t.seed = train_seed;
  return t;
}

void RunConfig::validate() const {
  resolve_schema();
  if (size < 1) throw InvalidArgument("size must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw InvalidArgument("val_fraction must lie in (0, 1)");
  diff_mode();
  model_config().validate();
  train_config().validate();
  if (!(lr > 0.0)) throw InvalidArgument("lr must be positive");
  if (decay_every > 1000000) throw InvalidArgument("decay_every is out of range");
}

nlohmann::ordered_json provenance(const RunConfig& config, int format_version) {
  nlohmann::ordered_json j;
  j["format_version"] = format_version;
  j["seed"] = config.seed;
  j["git_describe"] = git_describe();
  j["config"] = config.to_json();
  return j;
}

}  // namespace aacl
