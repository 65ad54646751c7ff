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

#include "aacl/dataworld.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "aacl/error.hpp"

namespace aacl {

namespace {

bool is_single_token(const std::string& word) {
  if (word.empty()) return false;
  return std::none_of(word.begin(), word.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == ',' || c == '.';
  });
}

template <typename T>
std::size_t index_of(const std::vector<T>& list, const T& value, const std::string& what) {
  auto it = std::find(list.begin(), list.end(), value);
  if (it == list.end()) throw DomainError("unknown " + what + " '" + value + "'");
  return static_cast<std::size_t>(it - list.begin());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Mixed-radix encoding of an item's attribute combination.
std::uint64_t combination_key(const AttributeItem& item, const AttributeSchema& schema) {
  std::uint64_t key = item.category;
  key = key * schema.genders.size() + item.gender;
  for (std::size_t s = 0; s < schema.slots.size(); ++s) key = key * schema.slots[s].values.size() + item.values[s];
  return key;
}

AttributeItem decode_combination(std::uint64_t key, const AttributeSchema& schema) {
  AttributeItem item;
  item.values.resize(schema.slots.size());
  for (std::size_t s = schema.slots.size(); s-- > 0;) {
    const auto radix = schema.slots[s].values.size();
    item.values[s] = static_cast<std::size_t>(key % radix);
    key /= radix;
  }
  item.gender = static_cast<std::size_t>(key % schema.genders.size());
  key /= schema.genders.size();
  item.category = static_cast<std::size_t>(key);
  return item;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

AttributeSchema AttributeSchema::desk_default() {
  AttributeSchema s;
  s.slots = {
      {"color", {"Navy", "Black", "White", "Red", "Green", "Grey", "Beige", "Pink"}},
      {"fabric", {"Jersey", "Denim", "Cotton", "Linen", "Wool"}},
      {"fit", {"Large", "Slim", "Regular", "Loose"}},
      {"neckline", {"Backless", "Square", "Round", "V-neck", "Crew", "Halter"}},
      {"pattern", {"Print", "Striped", "Plain", "Checked", "Floral"}},
      {"sleeve", {"3/4", "Short", "Long", "Sleeveless"}},
  };
  s.categories = {"Shirt", "Dress", "Jacket", "Trouser"};
  s.genders = {"Female", "Male"};
  return s;
}

void AttributeSchema::validate() const {
  if (slots.empty()) throw InvalidArgument("schema needs at least one attribute slot");
  if (categories.empty() || genders.empty()) throw InvalidArgument("schema needs categories and genders");
  std::unordered_set<std::string> names;
  for (const auto& slot : slots) {
    if (!is_single_token(slot.name)) throw InvalidArgument("slot name '" + slot.name + "' must be a single token");
    if (!names.insert(slot.name).second) throw InvalidArgument("duplicate slot name '" + slot.name + "'");
    if (slot.values.size() < 2) throw InvalidArgument("slot '" + slot.name + "' needs at least two values");
    std::unordered_set<std::string> seen;
    for (const auto& v : slot.values) {
      if (!is_single_token(v)) throw InvalidArgument("value '" + v + "' must be a single token");
      if (!seen.insert(v).second) throw InvalidArgument("duplicate value '" + v + "' in slot " + slot.name);
    }
  }
  for (const auto* list : {&categories, &genders}) {
    std::unordered_set<std::string> seen;
    for (const auto& v : *list) {
      if (!is_single_token(v)) throw InvalidArgument("label '" + v + "' must be a single token");
      if (!seen.insert(v).second) throw InvalidArgument("duplicate label '" + v + "'");
    }
  }
}

std::size_t AttributeSchema::slot_index(const std::string& name) const {
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == name) return i;
  throw DomainError("unknown attribute slot '" + name + "'");
}

std::size_t AttributeSchema::value_index(std::size_t slot, const std::string& value) const {
  return index_of(slots.at(slot).values, value, slots.at(slot).name + " value");
}

std::size_t AttributeSchema::category_index(const std::string& name) const {
  return index_of(categories, name, "category");
}

std::size_t AttributeSchema::gender_index(const std::string& name) const { return index_of(genders, name, "gender"); }

std::uint64_t AttributeSchema::combinations() const {
  constexpr std::uint64_t cap = std::uint64_t{1} << 62;
  std::uint64_t total = categories.size() * genders.size();
  for (const auto& slot : slots) {
    if (total > cap / slot.values.size()) return cap;
    total *= slot.values.size();
  }
  return total;
}

nlohmann::ordered_json AttributeSchema::to_json() const {
  nlohmann::ordered_json j;
  j["slots"] = nlohmann::ordered_json::array();
  for (const auto& slot : slots) j["slots"].push_back({{"name", slot.name}, {"values", slot.values}});
  j["categories"] = categories;
  j["genders"] = genders;
  return j;
}

AttributeSchema AttributeSchema::from_json(const nlohmann::json& j) {
  AttributeSchema s;
  try {
    for (const auto& slot : j.at("slots")) {
      s.slots.push_back({slot.at("name").get<std::string>(), slot.at("values").get<std::vector<std::string>>()});
    }
    s.categories = j.at("categories").get<std::vector<std::string>>();
    s.genders = j.at("genders").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed schema: ") + e.what());
  }
  s.validate();
  return s;
}

std::string AttributeSchema::hash() const { return hex64(fnv1a64(to_json().dump())); }

DiffMode DiffMode::parse(const std::string& text) {
  if (text == "1or2" || text == "1-or-2" || text == "one-or-two") return one_or_two();
  std::size_t k = 0;
  try {
    std::size_t used = 0;
    const long v = std::stol(text, &used);
    if (used != text.size() || v < 1) throw InvalidArgument("");
    k = static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw InvalidArgument("difference mode must be a positive integer or '1or2', got '" + text + "'");
  }
  return exactly(k);
}

std::string DiffMode::to_string() const { return kind == Kind::OneOrTwo ? "1or2" : std::to_string(k); }

bool DiffMode::admits(std::size_t distance) const {
  if (kind == Kind::OneOrTwo) return distance == 1 || distance == 2;
  return distance == k;
}

Catalog generate_catalog(const AttributeSchema& schema, std::size_t size, std::uint64_t seed) {
  schema.validate();
  const std::uint64_t total = schema.combinations();
  if (size > total) {
    throw DomainError("catalog size " + std::to_string(size) + " exceeds the " + std::to_string(total) +
                      " distinct attribute combinations");
  }
  std::mt19937_64 rng(seed);
  Catalog catalog;
  catalog.reserve(size);
  std::unordered_set<std::uint64_t> used;
  if (size * 2 > total) {
    std::vector<std::uint64_t> keys(total);
    std::iota(keys.begin(), keys.end(), 0);
    std::shuffle(keys.begin(), keys.end(), rng);
    keys.resize(size);
    for (auto key : keys) catalog.push_back(decode_combination(key, schema));
  } else {
    std::uniform_int_distribution<std::size_t> pick_cat(0, schema.categories.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_gender(0, schema.genders.size() - 1);
    while (catalog.size() < size) {
      AttributeItem item;
      item.category = pick_cat(rng);
      item.gender = pick_gender(rng);
      for (const auto& slot : schema.slots) {
        std::uniform_int_distribution<std::size_t> pick(0, slot.values.size() - 1);
        item.values.push_back(pick(rng));
      }
      if (used.insert(combination_key(item, schema)).second) catalog.push_back(std::move(item));
    }
  }
  for (std::size_t i = 0; i < catalog.size(); ++i) catalog[i].id = i;
  return catalog;
}

Catalog filter_small_categories(const Catalog& catalog, const AttributeSchema& schema, std::size_t min_items) {
  std::vector<std::size_t> counts(schema.categories.size(), 0);
  for (const auto& item : catalog) ++counts.at(item.category);
  Catalog kept;
  for (const auto& item : catalog) {
    if (counts[item.category] < min_items) continue;
    kept.push_back(item);
    kept.back().id = kept.size() - 1;
  }
  return kept;
}

CatalogSplit split_catalog(const Catalog& catalog, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction <= 1.0)) {
    throw InvalidArgument("validation fraction must lie in [0, 1]");
  }
  std::vector<std::size_t> order(catalog.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(catalog.size())));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<long>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<long>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  CatalogSplit split;
  for (auto i : train) split.train.push_back(catalog[i]);
  for (auto i : val) split.validation.push_back(catalog[i]);
  return split;
}

std::size_t slot_distance(const AttributeItem& a, const AttributeItem& b) {
  if (a.values.size() != b.values.size()) throw DimensionError("items have different slot counts");
  std::size_t d = 0;
  for (std::size_t s = 0; s < a.values.size(); ++s) d += a.values[s] != b.values[s] ? 1 : 0;
  return d;
}

bool admissible_pair(const AttributeItem& ref, const AttributeItem& target, const DiffMode& mode) {
  return ref.category == target.category && ref.gender == target.gender && mode.admits(slot_distance(ref, target));
}

std::string caption(const AttributeItem& item, const AttributeSchema& schema) {
  std::string out = schema.categories.at(item.category) + " is";
  for (std::size_t s = 0; s < schema.slots.size(); ++s) {
    if (s) out += " and";
    out += ' ';
    out += schema.slots[s].values.at(item.values.at(s));
    out += ' ';
    out += schema.slots[s].name;
  }
  return out;
}

namespace {

// Space-separated words with their starting offsets.
std::vector<std::pair<std::string, std::size_t>> split_words(const std::string& text) {
  std::vector<std::pair<std::string, std::size_t>> words;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == ' ') {
      if (i == 0 || text[i - 1] == ' ') throw ParseError("unexpected space", i);
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    words.emplace_back(text.substr(start, i - start), start);
  }
  return words;
}

}  // namespace

ParsedCaption parse_caption(const std::string& text, const AttributeSchema& schema) {
  auto words = split_words(text);
  const std::size_t expected = 2 + schema.slots.size() * 3 - 1;
  if (words.size() != expected) {
    throw ParseError("caption has " + std::to_string(words.size()) + " words, expected " + std::to_string(expected),
                     words.empty() ? 0 : words.back().second);
  }
  ParsedCaption parsed;
  try {
    parsed.category = schema.category_index(words[0].first);
  } catch (const DomainError&) {
    throw ParseError("unknown category '" + words[0].first + "'", 0);
  }
  if (words[1].first != "is") throw ParseError("expected 'is'", words[1].second);
  for (std::size_t s = 0; s < schema.slots.size(); ++s) {
    const std::size_t base = 2 + 3 * s;
    if (s > 0 && words[base - 1].first != "and") throw ParseError("expected 'and'", words[base - 1].second);
    if (words[base + 1].first != schema.slots[s].name) {
      throw ParseError("expected slot '" + schema.slots[s].name + "'", words[base + 1].second);
    }
    try {
      parsed.values.push_back(schema.value_index(s, words[base].first));
    } catch (const DomainError&) {
      throw ParseError("unknown value '" + words[base].first + "'", words[base].second);
    }
  }
  return parsed;
}

ItemPair sample_pair(const Catalog& items, const DiffMode& mode, std::mt19937_64& rng) {
  if (items.size() < 2) throw DomainError("sample_pair: need at least two items");
  std::uniform_int_distribution<std::size_t> pick(0, items.size() - 1);
  for (std::size_t attempt = 0; attempt < kMaxPairAttempts; ++attempt) {
    const std::size_t r = pick(rng);
    const std::size_t t = pick(rng);
    if (r == t) continue;
    if (admissible_pair(items[r], items[t], mode)) return {&items[r], &items[t]};
  }
  // Sparse modes: fall back to an exact draw over all admissible ordered pairs (same distribution).
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t r = 0; r < items.size(); ++r)
    for (std::size_t t = 0; t < items.size(); ++t)
      if (r != t && admissible_pair(items[r], items[t], mode)) pairs.emplace_back(r, t);
  if (pairs.empty()) throw DomainError("sample_pair: no admissible pair for mode " + mode.to_string());
  const auto [r, t] = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
  return {&items[r], &items[t]};
}

ItemPair sample_pair(const Catalog& items, const DiffMode& mode, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_pair(items, mode, rng);
}

std::vector<SlotChange> slot_diff(const AttributeItem& ref, const AttributeItem& target,
                                  const AttributeSchema& schema) {
  std::vector<SlotChange> diffs;
  for (std::size_t s = 0; s < schema.slots.size(); ++s) {
    if (ref.values.at(s) == target.values.at(s)) continue;
    const auto& slot = schema.slots[s];
    diffs.push_back({slot.name, slot.values.at(ref.values[s]), slot.values.at(target.values[s])});
  }
  return diffs;
}

std::string modification_text(const AttributeItem& ref, const AttributeItem& target,
                              const AttributeSchema& schema) {
  if (ref.category != target.category) throw DomainError("modification_text: items differ in category");
  auto diffs = slot_diff(ref, target, schema);
  if (diffs.empty()) throw DomainError("modification_text: items do not differ in any slot");
  std::string out = schema.categories.at(ref.category);
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    out += i == 0 ? ", replace " : ", and replace ";
    out += diffs[i].from + ' ' + diffs[i].slot + " with " + diffs[i].to + ' ' + diffs[i].slot;
  }
  out += '.';
  return out;
}

namespace {

class ModificationParser {
 public:
  explicit ModificationParser(const std::string& text) : text_(text) {}

  ParsedModification run() {
    ParsedModification out;
    out.category = word("category");
    expect(",");
    bool first = true;
    while (true) {
      expect(first ? " replace " : " and replace ");
      first = false;
      SlotChange change;
      change.from = word("value");
      expect(" ");
      change.slot = word("slot");
      expect(" with ");
      change.to = word("value");
      expect(" ");
      const std::size_t at = pos_;
      if (word("slot") != change.slot) throw ParseError("slot name differs between sides of 'with'", at);
      out.changes.push_back(std::move(change));
      if (peek() == '.') break;
      expect(",");
    }
    expect(".");
    if (pos_ != text_.size()) throw ParseError("trailing characters", pos_);
    return out;
  }

 private:
  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  void expect(const std::string& literal) {
    if (text_.compare(pos_, literal.size(), literal) != 0) throw ParseError("expected '" + literal + "'", pos_);
    pos_ += literal.size();
  }

  std::string word(const char* what) {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != ',' && text_[pos_] != '.') ++pos_;
    if (pos_ == start) throw ParseError(std::string("expected ") + what, start);
    return text_.substr(start, pos_ - start);
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

}  // namespace

ParsedModification parse_modification(const std::string& text) { return ModificationParser(text).run(); }

QueryTriplet make_triplet(const AttributeItem& ref, const AttributeItem& target, const AttributeSchema& schema) {
  return {ref.id, target.id, modification_text(ref, target, schema), slot_diff(ref, target, schema)};
}

std::vector<QueryTriplet> export_test_queries(const Catalog& validation, const AttributeSchema& schema,
                                              std::size_t n, const DiffMode& mode, std::uint64_t seed) {
  std::vector<QueryTriplet> out;
  out.reserve(n);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < n; ++i) {
    ItemPair pair = sample_pair(validation, mode, rng);
    out.push_back(make_triplet(*pair.reference, *pair.target, schema));
  }
  return out;
}

nlohmann::ordered_json data_header(const AttributeSchema& schema, std::uint64_t seed,
                                   const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json h;
  h["format_version"] = kDataFormatVersion;
  h["schema_hash"] = schema.hash();
  h["seed"] = seed;
  for (auto it = extra.begin(); it != extra.end(); ++it) h[it.key()] = it.value();
  return h;
}

void write_catalog(std::ostream& out, const Catalog& catalog, const AttributeSchema& schema,
                   const nlohmann::ordered_json& header) {
  nlohmann::ordered_json h = header;
  h["schema"] = schema.to_json();
  out << h.dump() << '\n';
  for (const auto& item : catalog) out << item_to_json(item, schema).dump() << '\n';
}

nlohmann::ordered_json item_to_json(const AttributeItem& item, const AttributeSchema& schema) {
  nlohmann::ordered_json row;
  row["id"] = item.id;
  row["category"] = schema.categories.at(item.category);
  row["gender"] = schema.genders.at(item.gender);
  nlohmann::ordered_json attrs = nlohmann::ordered_json::object();
  for (std::size_t s = 0; s < schema.slots.size(); ++s) {
    attrs[schema.slots[s].name] = schema.slots[s].values.at(item.values.at(s));
  }
  row["attributes"] = attrs;
  return row;
}

AttributeItem item_from_json(const nlohmann::json& j, const AttributeSchema& schema) {
  AttributeItem item;
  try {
    item.id = j.value("id", std::uint64_t{0});
    item.category = schema.category_index(j.at("category").get<std::string>());
    item.gender = schema.gender_index(j.at("gender").get<std::string>());
    const auto& attrs = j.at("attributes");
    for (std::size_t s = 0; s < schema.slots.size(); ++s) {
      item.values.push_back(schema.value_index(s, attrs.at(schema.slots[s].name).get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("item record: ") + e.what(), 0);
  }
  return item;
}

namespace {

nlohmann::json parse_line(const std::string& line, std::size_t line_no) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), e.byte);
  }
}

void check_header(const nlohmann::json& header) {
  if (!header.contains("format_version") || header["format_version"] != kDataFormatVersion) {
    throw MismatchError("unsupported data format version");
  }
}

}  // namespace

CatalogFile read_catalog(std::istream& in) {
  CatalogFile file;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("catalog file is empty", 0);
  file.header = parse_line(line, 1);
  check_header(file.header);
  if (!file.header.contains("schema")) throw ParseError("catalog header lacks a schema", 0);
  file.schema = AttributeSchema::from_json(file.header["schema"]);
  if (file.header.value("schema_hash", "") != file.schema.hash()) {
    throw MismatchError("catalog schema hash does not match its schema");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = parse_line(line, line_no);
    if (!j.contains("id")) throw ParseError("line " + std::to_string(line_no) + ": item without id", 0);
    try {
      file.items.push_back(item_from_json(j, file.schema));
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), 0);
    }
  }
  return file;
}

void write_triplets(std::ostream& out, const std::vector<QueryTriplet>& triplets,
                    const nlohmann::ordered_json& header) {
  out << header.dump() << '\n';
  for (const auto& t : triplets) {
    nlohmann::ordered_json row;
    row["ref_id"] = t.ref_id;
    row["target_id"] = t.target_id;
    row["text"] = t.text;
    row["diffs"] = nlohmann::ordered_json::array();
    for (const auto& d : t.diffs) row["diffs"].push_back({{"slot", d.slot}, {"from", d.from}, {"to", d.to}});
    out << row.dump() << '\n';
  }
}

TripletFile read_triplets(std::istream& in) {
  TripletFile file;
  std::string line;
  if (!std::getline(in, line)) throw ParseError("triplet file is empty", 0);
  file.header = parse_line(line, 1);
  check_header(file.header);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto j = parse_line(line, line_no);
    QueryTriplet t;
    try {
      t.ref_id = j.at("ref_id").get<std::uint64_t>();
      t.target_id = j.at("target_id").get<std::uint64_t>();
      t.text = j.at("text").get<std::string>();
      for (const auto& d : j.at("diffs")) {
        t.diffs.push_back({d.at("slot").get<std::string>(), d.at("from").get<std::string>(),
                           d.at("to").get<std::string>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), 0);
    }
    file.triplets.push_back(std::move(t));
  }
  return file;
}

std::map<std::string, std::size_t> category_counts(const std::vector<QueryTriplet>& triplets,
                                                   const Catalog& items, const AttributeSchema& schema) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : triplets) {
    if (t.ref_id >= items.size() || items[t.ref_id].id != t.ref_id) {
      throw DomainError("triplet references unknown item " + std::to_string(t.ref_id));
    }
    ++counts[schema.categories.at(items[t.ref_id].category)];
  }
  return counts;
}

}  // namespace aacl
