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
#include <ostream>
#include <string>
#include <vector>

#include "aacl/composition.hpp"
#include "aacl/config.hpp"
#include "aacl/retrieval.hpp"

namespace aacl {

// Product over blocks of the head-averaged α received by each position.
std::vector<double> attention_flow(const AttentionTrace& trace);
double attention_flow(const AttentionTrace& trace, std::size_t token_index);

// Min-max to [0, 1]; a constant input maps to all zeros.
std::vector<double> normalize_flow(const std::vector<double>& flows);

struct WordScore {
  std::string word;
  double raw = 0.0;
  double normalized = 0.0;
};

// Word tokens of one query, normalized among themselves. Repeated words
// keep their largest score. Order follows first occurrence.
std::vector<WordScore> word_scores(const AttentionTrace& trace);

struct WordCount {
  std::string word;
  std::size_t count = 0;
};

// Per word: number of queries in which its normalized flow reaches
// `threshold`. Sorted by count descending, then word; at most top_n rows.
std::vector<WordCount> top_words(Model& model, const Catalog& items, const std::vector<QueryTriplet>& queries,
                                 double threshold = 0.8, std::size_t top_n = 30);

struct HeatCell {
  std::string label;  // "s<stage>:<position>"
  int stage = 0;
  std::size_t position = 0;
  double raw = 0.0;
  double normalized = 0.0;
};

// Flow restricted to the image tokens of one query, normalized among them.
std::vector<HeatCell> token_heatmap(Model& model, const AttributeItem& reference, const std::string& text);

struct TimingRow {
  std::size_t n = 0;
  double median_ms = 0.0;
  std::vector<double> runs_ms;
};

struct ProbeOptions {
  std::size_t head_width = 16;
  std::size_t repetitions = 5;
  std::uint64_t seed = 3;
};

// Forward time of one attention layer (additive variants or dot-product)
// on random [N × head_width] inputs: a discarded warm-up, then the median
// of `repetitions` timed runs.
std::vector<TimingRow> complexity_probe(const std::vector<std::size_t>& ns, Variant variant,
                                        const ProbeOptions& options = {});

struct AblationVariant {
  std::string name;
  std::map<std::string, std::string> overrides;  // RunConfig keys
};

// "table5" (image stages), "table6" (attention variant), "table7" (k mode).
std::vector<AblationVariant> ablation_suite(const std::string& name);

struct AblationRow {
  std::string variant;
  nlohmann::ordered_json config;
  std::string error;                          // empty on success
  std::vector<EvalReport> per_seed;
  std::vector<std::string> categories;        // per-category rows, then "Average"
  std::map<std::string, std::map<std::size_t, double>> mean, sd;  // category -> K -> value
  std::map<std::string, std::size_t> n_queries;
};

struct AblationReport {
  std::string suite;
  std::vector<std::size_t> ks;
  std::size_t seeds = 0;
  std::vector<AblationRow> rows;

  void write_jsonl(std::ostream& out) const;
  // One line per variant: mean and sd of the category-averaged R@K.
  void write_csv(std::ostream& out) const;
};

// Trains every variant for `seeds` seeds (init_seed + s, train_seed + s) and
// evaluates each on its world's fixed test-query file. A failing variant is
// recorded with its error; the suite continues.
AblationReport run_ablation(const RunConfig& base, const std::string& suite_name,
                            const std::vector<AblationVariant>& variants, std::size_t seeds,
                            const std::vector<std::size_t>& ks);

}  // namespace aacl
