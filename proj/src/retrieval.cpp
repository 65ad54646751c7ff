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

#include "aacl/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "aacl/error.hpp"

namespace aacl {

GalleryIndex::GalleryIndex(std::vector<std::uint64_t> ids, std::vector<double> rows, std::size_t dim)
    : ids_(std::move(ids)), rows_(std::move(rows)), dim_(dim) {
  if (rows_.size() != ids_.size() * dim_) throw DimensionError("gallery matrix does not match id count");
}

GalleryIndex build_index(const Catalog& catalog, Model& model) {
  std::vector<std::uint64_t> ids;
  std::vector<double> rows;
  const std::size_t dim = model.config.encoder.d;
  ids.reserve(catalog.size());
  rows.reserve(catalog.size() * dim);
  for (const AttributeItem& item : catalog) {
    Tensor v;
    try {
      v = model.image_vector(item);
    } catch (const Error& e) {
      throw Error(e.kind(), "encoding item " + std::to_string(item.id) + ": " + e.what());
    }
    ids.push_back(item.id);
    rows.insert(rows.end(), v.values().begin(), v.values().end());
  }
  return GalleryIndex(std::move(ids), std::move(rows), dim);
}

RankedResult search(const GalleryIndex& index, std::span<const double> query, std::size_t k,
                    std::uint64_t query_id) {
  if (k < 1) throw InvalidArgument("search: K must be at least 1");
  if (index.size() > 0 && query.size() != index.dim()) throw DimensionError("search: query width differs from index");
  RankedResult out;
  out.query_id = query_id;
  out.hits.resize(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    auto row = index.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * query[j];
    out.hits[i] = {index.ids()[i], s};
  }
  auto better = [](const Hit& a, const Hit& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
  };
  const std::size_t n = std::min(k, out.hits.size());
  std::partial_sort(out.hits.begin(), out.hits.begin() + static_cast<std::ptrdiff_t>(n), out.hits.end(), better);
  out.hits.resize(n);
  return out;
}

double recall_at_k(const std::vector<RankedResult>& results, const std::map<std::uint64_t, std::uint64_t>& truth,
                   std::size_t k) {
  if (results.empty()) return 0.0;
  std::size_t found = 0;
  for (const RankedResult& r : results) {
    auto it = truth.find(r.query_id);
    if (it == truth.end()) throw InvalidArgument("no ground truth for query " + std::to_string(r.query_id));
    const std::size_t n = std::min(k, r.hits.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (r.hits[i].id == it->second) {
        ++found;
        break;
      }
    }
  }
  return static_cast<double>(found) / static_cast<double>(results.size());
}

std::string to_string(QueryMode mode) {
  switch (mode) {
    case QueryMode::Composed: return "composed";
    case QueryMode::ImageOnly: return "image_only";
    case QueryMode::TextOnly: return "text_only";
  }
  return "?";
}

namespace {

std::unordered_map<std::uint64_t, const AttributeItem*> id_lookup(const Catalog& items) {
  std::unordered_map<std::uint64_t, const AttributeItem*> m;
  m.reserve(items.size());
  for (const AttributeItem& it : items) m.emplace(it.id, &it);
  return m;
}

const AttributeItem& lookup(const std::unordered_map<std::uint64_t, const AttributeItem*>& m, std::uint64_t id) {
  auto it = m.find(id);
  if (it == m.end()) throw MismatchError("query references unknown item " + std::to_string(id));
  return *it->second;
}

}  // namespace

Tensor baseline_embed(const QueryTriplet& triplet, const Catalog& items, QueryMode mode, Model& model) {
  switch (mode) {
    case QueryMode::TextOnly: return model.text_vector(triplet.text);
    case QueryMode::ImageOnly: return model.image_vector(lookup(id_lookup(items), triplet.ref_id));
    case QueryMode::Composed: return model.query_vector(lookup(id_lookup(items), triplet.ref_id), triplet.text);
  }
  throw InvalidArgument("unknown query mode");
}

EvalReport evaluate(Model& model, const GalleryIndex& index, const Catalog& items,
                    const std::vector<QueryTriplet>& queries, const std::vector<std::size_t>& ks, QueryMode mode) {
  if (ks.empty()) throw InvalidArgument("evaluate: empty K list");
  const auto by_id = id_lookup(items);
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());

  // category name -> (query ids, truth)
  std::map<std::string, std::vector<RankedResult>> per_category;
  std::map<std::uint64_t, std::uint64_t> truth;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const QueryTriplet& t = queries[q];
    const AttributeItem& ref = lookup(by_id, t.ref_id);
    lookup(by_id, t.target_id);
    Tensor v;
    switch (mode) {
      case QueryMode::Composed: v = model.query_vector(ref, t.text); break;
      case QueryMode::ImageOnly: v = model.image_vector(ref); break;
      case QueryMode::TextOnly: v = model.text_vector(t.text); break;
    }
    truth[q] = t.target_id;
    per_category[model.schema.categories.at(ref.category)].push_back(search(index, v.values(), kmax, q));
  }

  EvalReport report;
  report.model_label = to_string(mode);
  report.ks = ks;
  CategoryRecall avg;
  avg.category = "Average";
  for (const auto& [name, results] : per_category) {
    CategoryRecall row;
    row.category = name;
    row.n_queries = results.size();
    for (std::size_t k : ks) {
      row.recall[k] = recall_at_k(results, truth, k);
      avg.recall[k] += row.recall[k];
    }
    avg.n_queries += row.n_queries;
    report.rows.push_back(std::move(row));
  }
  const double n = static_cast<double>(std::max<std::size_t>(per_category.size(), 1));
  for (std::size_t k : ks) avg.recall[k] /= n;
  report.rows.push_back(std::move(avg));
  return report;
}

void EvalReport::write_jsonl(std::ostream& out) const {
  for (const CategoryRecall& row : rows) {
    nlohmann::ordered_json j;
    j["model"] = model_label;
    j["category"] = row.category;
    for (std::size_t k : ks) j["R@" + std::to_string(k)] = row.recall.at(k);
    j["n_queries"] = row.n_queries;
    out << j.dump() << '\n';
  }
}

}  // namespace aacl
