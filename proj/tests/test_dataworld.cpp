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

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "aacl/config.hpp"
#include "aacl/dataworld.hpp"
#include "aacl/error.hpp"
#include "doctest.h"

using namespace aacl;

namespace {

AttributeItem make_item(const AttributeSchema& s, const std::string& category, const std::string& gender,
                        const std::vector<std::string>& values) {
  AttributeItem it;
  it.category = s.category_index(category);
  it.gender = s.gender_index(gender);
  for (std::size_t i = 0; i < values.size(); ++i) it.values.push_back(s.value_index(i, values[i]));
  return it;
}

std::string write_to_string(const std::vector<QueryTriplet>& t, const nlohmann::ordered_json& header) {
  std::ostringstream out;
  write_triplets(out, t, header);
  return out.str();
}

}  // namespace

TEST_CASE("catalog: size, determinism and validity") {
  const AttributeSchema s = AttributeSchema::desk_default();
  CHECK(generate_catalog(s, 1, 3).size() == 1);
  Catalog a = generate_catalog(s, 2000, 7), b = generate_catalog(s, 2000, 7);
  REQUIRE(a.size() == 2000);
  std::set<std::uint64_t> ids;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK(a[i].same_attributes(b[i]));
    ids.insert(a[i].id);
    CHECK(a[i].category < s.categories.size());
    CHECK(a[i].gender < s.genders.size());
    REQUIRE(a[i].values.size() == s.slots.size());
    for (std::size_t k = 0; k < s.slots.size(); ++k) CHECK(a[i].values[k] < s.slots[k].values.size());
  }
  CHECK(ids.size() == 2000);
  CHECK_FALSE(generate_catalog(s, 50, 8)[3].same_attributes(generate_catalog(s, 50, 9)[3]));
}

TEST_CASE("catalog: size beyond the distinct combinations is an error") {
  const AttributeSchema toy = toy_schema();
  CHECK(toy.combinations() == 8);
  CHECK(generate_catalog(toy, 8, 1).size() == 8);
  CHECK_THROWS_AS(generate_catalog(toy, 9, 1), DomainError);
}

TEST_CASE("caption: example record and single-slot schema") {
  const AttributeSchema s = AttributeSchema::desk_default();
  AttributeItem shirt = make_item(s, "Shirt", "Female", {"Navy", "Jersey", "Large", "Backless", "Print", "3/4"});
  CHECK(caption(shirt, s) ==
        "Shirt is Navy color and Jersey fabric and Large fit and Backless neckline and Print pattern and 3/4 sleeve");

  AttributeSchema one;
  one.slots = {{"a", {"v", "w"}}};
  one.categories = {"X"};
  one.genders = {"F"};
  AttributeItem x;
  x.values = {0};
  CHECK(caption(x, one) == "X is v a");
}

TEST_CASE("caption: parses back to the exact record") {
  const AttributeSchema s = AttributeSchema::desk_default();
  for (const auto& item : generate_catalog(s, 500, 12)) {
    ParsedCaption p = parse_caption(caption(item, s), s);
    CHECK(p.category == item.category);
    CHECK(p.values == item.values);
  }
  CHECK_THROWS_AS(parse_caption("Shirt was Navy color", s), ParseError);
}

TEST_CASE("modification text: example record, single change and round trip") {
  const AttributeSchema s = AttributeSchema::desk_default();
  AttributeItem ref = make_item(s, "Shirt", "Male", {"Navy", "Jersey", "Large", "Backless", "Print", "3/4"});
  AttributeItem tgt = make_item(s, "Shirt", "Male", {"Navy", "Jersey", "Large", "Square", "Print", "Short"});
  CHECK(modification_text(ref, tgt, s) ==
        "Shirt, replace Backless neckline with Square neckline, and replace 3/4 sleeve with Short sleeve.");

  AttributeItem one = ref;
  one.values[0] = s.value_index(0, "Red");
  const std::string single = modification_text(ref, one, s);
  CHECK(single == "Shirt, replace Navy color with Red color.");
  CHECK(single.find(" and ") == std::string::npos);

  CHECK_THROWS_AS(modification_text(ref, ref, s), DomainError);

  Catalog cat = generate_catalog(s, 2000, 21);
  std::mt19937_64 rng(22);
  for (int i = 0; i < 10000; ++i) {
    ItemPair p = sample_pair(cat, DiffMode::one_or_two(), rng);
    ParsedModification m = parse_modification(modification_text(*p.reference, *p.target, s));
    CHECK(m.category == s.categories[p.reference->category]);
    CHECK(m.changes == slot_diff(*p.reference, *p.target, s));
  }
}

TEST_CASE("modification text: malformed input reports a position") {
  try {
    parse_modification("Shirt, replace Navy color with Red colour.");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.position() > 0);
  }
  CHECK_THROWS_AS(parse_modification("Shirt replace Navy color with Red color."), ParseError);
  CHECK_THROWS_AS(parse_modification("Shirt, replace Navy color with Red color"), ParseError);
}

TEST_CASE("pair sampling: forced and impossible cases") {
  const AttributeSchema s = toy_schema();
  Catalog two(2);
  two[0] = make_item(s, "Shirt", "Female", {"Navy", "Short"});
  two[1] = make_item(s, "Shirt", "Female", {"Black", "Short"});
  two[1].id = 1;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    ItemPair p = sample_pair(two, DiffMode::exactly(1), rng);
    CHECK(p.reference != p.target);
  }
  CHECK_THROWS_AS(sample_pair(two, DiffMode::exactly(2), rng), DomainError);
}

TEST_CASE("pair sampling: a lone admissible pair in a large catalog is still found") {
  // Only (0,1) and (1,0) are Hamming-1; rejection alone would almost always give up.
  const AttributeSchema s = toy_schema();
  Catalog cat(1000, make_item(s, "Shirt", "Female", {"White", "Long"}));
  cat[0] = make_item(s, "Shirt", "Female", {"Navy", "Short"});
  cat[1] = make_item(s, "Shirt", "Female", {"Black", "Short"});
  for (std::size_t i = 0; i < cat.size(); ++i) cat[i].id = i;
  std::mt19937_64 rng(5);
  int forward = 0;
  for (int i = 0; i < 20; ++i) {
    ItemPair p = sample_pair(cat, DiffMode::exactly(1), rng);
    REQUIRE(p.reference->id + p.target->id == 1);
    forward += p.reference->id == 0;
  }
  CHECK(forward > 0);
  CHECK(forward < 20);
}

TEST_CASE("pair sampling: constraints hold on the desk world") {
  const AttributeSchema s = AttributeSchema::desk_default();
  Catalog cat = generate_catalog(s, 2000, 31);
  std::mt19937_64 rng(32);
  for (int i = 0; i < 10000; ++i) {
    ItemPair p = sample_pair(cat, DiffMode::exactly(2), rng);
    CHECK(p.reference->category == p.target->category);
    CHECK(p.reference->gender == p.target->gender);
    CHECK(slot_distance(*p.reference, *p.target) == 2);
  }
}

TEST_CASE("pair sampling: uniform over the enumerated admissible pairs") {
  const AttributeSchema s = toy_schema();
  Catalog cat = generate_catalog(s, 8, 41);
  for (DiffMode mode : {DiffMode::exactly(1), DiffMode::exactly(2), DiffMode::one_or_two()}) {
    std::set<std::pair<std::uint64_t, std::uint64_t>> admissible;
    for (const auto& a : cat)
      for (const auto& b : cat)
        if (a.id != b.id && a.category == b.category && a.gender == b.gender && mode.admits(slot_distance(a, b)))
          admissible.insert({a.id, b.id});
    REQUIRE(!admissible.empty());
    const int n = 10000;
    std::map<std::pair<std::uint64_t, std::uint64_t>, int> counts;
    std::mt19937_64 rng(42);
    for (int i = 0; i < n; ++i) {
      ItemPair p = sample_pair(cat, mode, rng);
      auto key = std::make_pair(p.reference->id, p.target->id);
      CHECK(admissible.count(key) == 1);
      ++counts[key];
    }
    const double prob = 1.0 / static_cast<double>(admissible.size());
    const double mean = n * prob, sigma = std::sqrt(n * prob * (1 - prob));
    // Pearson χ² against the 0.999 quantile (Wilson–Hilferty).
    double chi2 = 0.0;
    for (const auto& pair : admissible) chi2 += (counts[pair] - mean) * (counts[pair] - mean) / mean;
    const double df = static_cast<double>(admissible.size() - 1), z = 3.0902;
    const double crit = df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3.0);
    INFO(mode.to_string());
    CHECK(chi2 < crit);
    // Per-pair 3σ band on the exactly-2 mode used for queries.
    if (mode.kind == DiffMode::Kind::Exactly && mode.k == 2) {
      for (const auto& pair : admissible) {
        INFO("pair ", pair.first, "->", pair.second);
        CHECK(std::abs(counts[pair] - mean) <= 3.0 * sigma);
      }
    }
  }
}

TEST_CASE("diff modes") {
  CHECK(DiffMode::parse("2").admits(2));
  CHECK_FALSE(DiffMode::parse("2").admits(1));
  CHECK(DiffMode::parse("1or2").admits(1));
  CHECK(DiffMode::parse("1or2").admits(2));
  CHECK_FALSE(DiffMode::parse("1or2").admits(3));
  CHECK(DiffMode::parse("1or2").to_string() == "1or2");
  CHECK_THROWS_AS(DiffMode::parse("0"), InvalidArgument);
  CHECK_THROWS_AS(DiffMode::parse("two"), InvalidArgument);
}

TEST_CASE("split and category filtering") {
  const AttributeSchema s = AttributeSchema::desk_default();
  Catalog cat = generate_catalog(s, 1000, 51);
  CatalogSplit sp = split_catalog(cat, 0.2, 52);
  CHECK(sp.validation.size() == 200);
  CHECK(sp.train.size() == 800);
  std::set<std::uint64_t> ids;
  for (const auto& i : sp.train) ids.insert(i.id);
  for (const auto& i : sp.validation) CHECK(ids.insert(i.id).second);
  CHECK(ids.size() == 1000);
  CHECK_THROWS_AS(split_catalog(cat, 1.5, 1), InvalidArgument);

  Catalog f = filter_small_categories(cat, s, 1000);
  CHECK(f.empty());
  Catalog g = filter_small_categories(cat, s, 0);
  CHECK(g.size() == cat.size());
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i].id == i);
}

TEST_CASE("test queries: header-only file, determinism and targets from validation") {
  const AttributeSchema s = AttributeSchema::desk_default();
  Catalog cat = generate_catalog(s, 2000, 61);
  CatalogSplit sp = split_catalog(cat, 0.2, 62);
  auto header = data_header(s, 61);

  auto none = export_test_queries(sp.validation, s, 0, DiffMode::exactly(2), 63);
  CHECK(none.empty());
  const std::string empty_file = write_to_string(none, header);
  std::istringstream in(empty_file);
  TripletFile tf = read_triplets(in);
  CHECK(tf.triplets.empty());
  CHECK(tf.header.at("format_version") == kDataFormatVersion);
  CHECK(tf.header.at("schema_hash") == s.hash());

  auto q1 = export_test_queries(sp.validation, s, 500, DiffMode::exactly(2), 63);
  auto q2 = export_test_queries(sp.validation, s, 500, DiffMode::exactly(2), 63);
  CHECK(write_to_string(q1, header) == write_to_string(q2, header));

  std::set<std::uint64_t> val;
  for (const auto& i : sp.validation) val.insert(i.id);
  for (const auto& t : q1) {
    CHECK(val.count(t.target_id) == 1);
    CHECK(val.count(t.ref_id) == 1);
    CHECK(t.diffs.size() == 2);
    CHECK(t.text == modification_text(cat[t.ref_id], cat[t.target_id], s));
  }
}

TEST_CASE("file round trips and malformed records") {
  const AttributeSchema s = AttributeSchema::desk_default();
  Catalog cat = generate_catalog(s, 100, 71);
  std::stringstream ss;
  write_catalog(ss, cat, s, data_header(s, 71));
  CatalogFile cf = read_catalog(ss);
  REQUIRE(cf.items.size() == 100);
  CHECK(cf.schema.hash() == s.hash());
  for (std::size_t i = 0; i < 100; ++i) CHECK(cf.items[i].same_attributes(cat[i]));

  std::stringstream bad;
  bad << data_header(s, 1).dump() << "\n{\"id\":0,\"category\":\"Hat\"}\n";
  CHECK_THROWS_AS(read_catalog(bad), ParseError);
  std::stringstream garbage("not json\n");
  CHECK_THROWS_AS(read_catalog(garbage), ParseError);

  auto j = item_to_json(cat[5], s);
  CHECK(item_from_json(nlohmann::json::parse(j.dump()), s).same_attributes(cat[5]));
  CHECK_THROWS_AS(item_from_json(nlohmann::json::parse(R"({"category":"Shirt"})"), s), ParseError);
}

TEST_CASE("schema json round trip and hash") {
  const AttributeSchema s = AttributeSchema::desk_default();
  AttributeSchema back = AttributeSchema::from_json(nlohmann::json::parse(s.to_json().dump()));
  CHECK(back.hash() == s.hash());
  CHECK(toy_schema().hash() != s.hash());
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}
