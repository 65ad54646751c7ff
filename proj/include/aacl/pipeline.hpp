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

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aacl/analysis.hpp"
#include "aacl/config.hpp"
#include "aacl/gradcheck.hpp"
#include "aacl/retrieval.hpp"

namespace aacl {

// Catalog, train/validation split and fixed test queries of one run.
struct World {
  AttributeSchema schema;
  Catalog catalog;
  CatalogSplit split;
  std::vector<QueryTriplet> queries;
};

World build_world(const RunConfig& config);

// Train/validation split recorded by a catalog file's header.
CatalogSplit split_from_header(const CatalogFile& file);

// Runs epochs until state.epoch reaches `epochs`.
void train_until(TrainState& state, const Catalog& train_items, const TrainConfig& config, std::size_t epochs,
                 const std::function<void(const EpochMetrics&)>& on_epoch = {});

// --- commands -------------------------------------------------------------

struct GenDataResult {
  std::filesystem::path catalog_path;
  std::filesystem::path queries_path;
  std::size_t items = 0;
  std::size_t train_items = 0;
  std::size_t validation_items = 0;
  std::size_t queries = 0;
  std::map<std::string, std::size_t> queries_per_category;
};
GenDataResult gen_data(const RunConfig& config, const std::filesystem::path& out_dir);

struct TrainOptions {
  std::filesystem::path catalog;
  std::filesystem::path checkpoint_out;
  std::filesystem::path resume_from;  // empty: start from initialization
  std::filesystem::path log;          // empty: <checkpoint_out>/loss.jsonl
};
struct TrainResult {
  int start_epoch = 0;
  int end_epoch = 0;
  std::vector<EpochMetrics> history;
};
TrainResult train(const RunConfig& config, const TrainOptions& options);

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path catalog;
  std::filesystem::path queries;
  std::filesystem::path report;
  std::vector<std::size_t> ks = {1, 10, 50};
  bool baselines = false;
};
std::vector<EvalReport> eval(const EvalOptions& options);

struct AblateOptions {
  std::string suite = "table6";  // table5 | table6 | table7 | all
  std::size_t seeds = 3;
  std::vector<std::size_t> ks = {1, 10, 50};
  std::filesystem::path out_dir;
};
std::vector<AblationReport> ablate(const RunConfig& config, const AblateOptions& options);

struct AttnOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path catalog;
  std::filesystem::path queries;
  std::filesystem::path out_dir;
  double threshold = 0.8;
  std::size_t top_n = 30;
  std::size_t heatmaps = 8;  // queries exported as token heatmaps
};
struct AttnResult {
  std::vector<WordCount> words;
  std::filesystem::path words_csv, heatmap_csv, trace_jsonl;
};
AttnResult attn(const AttnOptions& options);

struct GradcheckOptions {
  std::size_t seeds = 20;
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t batch = 3;
  std::size_t d = 16;
  std::size_t heads = 2;
  std::size_t blocks = 2;
  std::size_t embed_dim = 8;
  std::size_t max_text_len = 12;
};
struct GradcheckSeed {
  std::uint64_t seed = 0;
  GradCheckReport report;
};
struct GradcheckResult {
  std::vector<GradcheckSeed> seeds;
  double max_relative_error = 0.0;
  bool passed = false;
};
// Full pipeline (encoders, blocks, pool, loss) on one small batch per seed;
// the variant, temperature and k mode come from `config`.
GradcheckResult gradcheck_suite(const RunConfig& config, const GradcheckOptions& options);

// Comma-separated K list, e.g. "1,10,50".
std::vector<std::size_t> parse_k_list(const std::string& text);

}  // namespace aacl
