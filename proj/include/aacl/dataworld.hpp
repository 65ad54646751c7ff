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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

namespace aacl {

struct AttributeSlot {
  std::string name;
  std::vector<std::string> values;
};

struct AttributeSchema {
  std::vector<AttributeSlot> slots;
  std::vector<std::string> categories;
  std::vector<std::string> genders;

  // 6 slots × 4–8 values, 4 categories, 2 genders.
  static AttributeSchema desk_default();

  void validate() const;
  std::size_t slot_index(const std::string& name) const;
  std::size_t value_index(std::size_t slot, const std::string& value) const;
  std::size_t category_index(const std::string& name) const;
  std::size_t gender_index(const std::string& name) const;
  // Number of distinct (category, gender, slot values) combinations, saturating.
  std::uint64_t combinations() const;

  nlohmann::ordered_json to_json() const;
  static AttributeSchema from_json(const nlohmann::json& j);
  // FNV-1a of the canonical JSON form, 16 hex digits.
  std::string hash() const;
};

struct AttributeItem {
  std::uint64_t id = 0;
  std::size_t category = 0;
  std::size_t gender = 0;
  std::vector<std::size_t> values;  // one index per schema slot

  bool same_attributes(const AttributeItem& other) const {
    return category == other.category && gender == other.gender && values == other.values;
  }
};

using Catalog = std::vector<AttributeItem>;

struct SlotChange {
  std::string slot;
  std::string from;
  std::string to;
  friend bool operator==(const SlotChange&, const SlotChange&) = default;
};

struct QueryTriplet {
  std::uint64_t ref_id = 0;
  std::uint64_t target_id = 0;
  std::string text;
  std::vector<SlotChange> diffs;
};

// Which slot Hamming distances are admissible for a (reference, target) pair.
struct DiffMode {
  enum class Kind { Exactly, OneOrTwo };
  Kind kind = Kind::Exactly;
  std::size_t k = 2;

  static DiffMode exactly(std::size_t k) { return {Kind::Exactly, k}; }
  static DiffMode one_or_two() { return {Kind::OneOrTwo, 0}; }
  static DiffMode parse(const std::string& text);  // "1", "2", "1or2", ...
  std::string to_string() const;
  bool admits(std::size_t distance) const;
};

constexpr std::size_t kMaxPairAttempts = 10000;

Catalog generate_catalog(const AttributeSchema& schema, std::size_t size, std::uint64_t seed);

// Drops categories with fewer than `min_items` items and renumbers ids densely.
Catalog filter_small_categories(const Catalog& catalog, const AttributeSchema& schema, std::size_t min_items);

struct CatalogSplit {
  Catalog train;
  Catalog validation;
};

CatalogSplit split_catalog(const Catalog& catalog, double validation_fraction, std::uint64_t seed);

std::size_t slot_distance(const AttributeItem& a, const AttributeItem& b);
bool admissible_pair(const AttributeItem& ref, const AttributeItem& target, const DiffMode& mode);

std::string caption(const AttributeItem& item, const AttributeSchema& schema);

struct ParsedCaption {
  std::size_t category = 0;
  std::vector<std::size_t> values;
};
ParsedCaption parse_caption(const std::string& text, const AttributeSchema& schema);

struct ItemPair {
  const AttributeItem* reference = nullptr;
  const AttributeItem* target = nullptr;
};

// Rejection sampling of an ordered pair, uniform over admissible pairs.
ItemPair sample_pair(const Catalog& items, const DiffMode& mode, std::mt19937_64& rng);
ItemPair sample_pair(const Catalog& items, const DiffMode& mode, std::uint64_t seed);

std::vector<SlotChange> slot_diff(const AttributeItem& ref, const AttributeItem& target,
                                  const AttributeSchema& schema);

// "<Category>, replace <v> <slot> with <v'> <slot>, and replace … ."
std::string modification_text(const AttributeItem& ref, const AttributeItem& target,
                              const AttributeSchema& schema);

struct ParsedModification {
  std::string category;
  std::vector<SlotChange> changes;
};
ParsedModification parse_modification(const std::string& text);

QueryTriplet make_triplet(const AttributeItem& ref, const AttributeItem& target, const AttributeSchema& schema);

std::vector<QueryTriplet> export_test_queries(const Catalog& validation, const AttributeSchema& schema,
                                              std::size_t n, const DiffMode& mode, std::uint64_t seed);

// Line-delimited JSON files. The first line is a header record carrying
// format_version, schema_hash and seed plus any provenance fields given.
constexpr int kDataFormatVersion = 1;

nlohmann::ordered_json data_header(const AttributeSchema& schema, std::uint64_t seed,
                                   const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

// {id, category, gender, attributes:{slot: value}}
nlohmann::ordered_json item_to_json(const AttributeItem& item, const AttributeSchema& schema);
AttributeItem item_from_json(const nlohmann::json& j, const AttributeSchema& schema);

void write_catalog(std::ostream& out, const Catalog& catalog, const AttributeSchema& schema,
                   const nlohmann::ordered_json& header);

struct CatalogFile {
  nlohmann::json header;
  AttributeSchema schema;
  Catalog items;
};
CatalogFile read_catalog(std::istream& in);

void write_triplets(std::ostream& out, const std::vector<QueryTriplet>& triplets,
                    const nlohmann::ordered_json& header);

struct TripletFile {
  nlohmann::json header;
  std::vector<QueryTriplet> triplets;
};
TripletFile read_triplets(std::istream& in);

std::map<std::string, std::size_t> category_counts(const std::vector<QueryTriplet>& triplets,
                                                   const Catalog& items, const AttributeSchema& schema);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace aacl
