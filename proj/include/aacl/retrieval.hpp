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
#include <map>
#include <string>
#include <vector>

#include "aacl/dataworld.hpp"
#include "aacl/model.hpp"
#include "json.hpp"

namespace aacl {

// Unit-norm gallery embeddings, one row per item. Immutable once built.
class GalleryIndex {
 public:
  GalleryIndex() = default;
  GalleryIndex(std::vector<std::uint64_t> ids, std::vector<double> rows, std::size_t dim);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::uint64_t>& ids() const noexcept { return ids_; }
  std::span<const double> row(std::size_t i) const { return {rows_.data() + i * dim_, dim_}; }
  const std::vector<double>& matrix() const noexcept { return rows_; }

 private:
  std::vector<std::uint64_t> ids_;
  std::vector<double> rows_;
  std::size_t dim_ = 0;
};

GalleryIndex build_index(const Catalog& catalog, Model& model);

struct Hit {
  std::uint64_t id = 0;
  double similarity = 0.0;
};

struct RankedResult {
  std::uint64_t query_id = 0;
  std::vector<Hit> hits;  // similarity non-increasing, ties by ascending id
};

// Exact top-K by dot product. K larger than the gallery yields the full ranking.
RankedResult search(const GalleryIndex& index, std::span<const double> query, std::size_t k,
                    std::uint64_t query_id = 0);

// Fraction of results whose ground-truth target appears in the first K hits.
double recall_at_k(const std::vector<RankedResult>& results, const std::map<std::uint64_t, std::uint64_t>& truth,
                   std::size_t k);

enum class QueryMode { Composed, ImageOnly, TextOnly };
std::string to_string(QueryMode mode);

Tensor baseline_embed(const QueryTriplet& triplet, const Catalog& items, QueryMode mode, Model& model);

struct CategoryRecall {
  std::string category;
  std::map<std::size_t, double> recall;  // K -> R@K
  std::size_t n_queries = 0;
};

struct EvalReport {
  std::string model_label;
  std::vector<std::size_t> ks;
  std::vector<CategoryRecall> rows;  // per category, then "Average" (mean over categories)

  const CategoryRecall& average() const { return rows.back(); }
  void write_jsonl(std::ostream& out) const;
};

// Ranks the gallery for every triplet; the query id of each result is its
// position in `queries`. Items of `items` provide references and categories.
EvalReport evaluate(Model& model, const GalleryIndex& index, const Catalog& items,
                    const std::vector<QueryTriplet>& queries, const std::vector<std::size_t>& ks, QueryMode mode);

}  // namespace aacl
