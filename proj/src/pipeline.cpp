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

#include "aacl/pipeline.hpp"

#include <fstream>
#include <sstream>
#include <unordered_map>

#include "aacl/error.hpp"

namespace aacl {

namespace fs = std::filesystem;

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | mode);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

CatalogFile load_catalog(const fs::path& path) {
  auto in = open_in(path);
  return read_catalog(in);
}

TripletFile load_triplets(const fs::path& path) {
  auto in = open_in(path);
  return read_triplets(in);
}

RunConfig config_from_manifest(const nlohmann::json& manifest) {
  if (!manifest.contains("config")) throw ParseError("checkpoint manifest lacks the run config", 0);
  return RunConfig::from_json(manifest.at("config"));
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

World build_world(const RunConfig& config) {
  config.validate();
  World w;
  w.schema = config.resolve_schema();
  w.catalog = generate_catalog(w.schema, config.size, config.seed);
  if (config.min_category_items > 0) w.catalog = filter_small_categories(w.catalog, w.schema, config.min_category_items);
  w.split = split_catalog(w.catalog, config.val_fraction, config.seed);
  w.queries = export_test_queries(w.split.validation, w.schema, config.n_queries, config.diff_mode(), config.seed);
  return w;
}

CatalogSplit split_from_header(const CatalogFile& file) {
  try {
    return split_catalog(file.items, file.header.at("val_fraction").get<double>(),
                         file.header.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("catalog header lacks split fields: ") + e.what(), 0);
  }
}

void train_until(TrainState& state, const Catalog& train_items, const TrainConfig& config, std::size_t epochs,
                 const std::function<void(const EpochMetrics&)>& on_epoch) {
  while (static_cast<std::size_t>(state.epoch) < epochs) {
    EpochMetrics m = train_epoch(state, train_items, config);
    if (on_epoch) on_epoch(m);
  }
}

GenDataResult gen_data(const RunConfig& config, const fs::path& out_dir) {
  World w = build_world(config);
  nlohmann::ordered_json extra;
  extra["git_describe"] = git_describe();
  extra["size"] = config.size;
  extra["val_fraction"] = config.val_fraction;
  extra["min_category_items"] = config.min_category_items;
  extra["config"] = config.to_json();

  GenDataResult r;
  r.catalog_path = out_dir / "catalog.jsonl";
  r.queries_path = out_dir / "test_queries.jsonl";
  {
    auto out = open_out(r.catalog_path);
    write_catalog(out, w.catalog, w.schema, data_header(w.schema, config.seed, extra));
    finish(out, r.catalog_path);
  }
  r.queries_per_category = category_counts(w.queries, w.catalog, w.schema);
  {
    nlohmann::ordered_json qextra = extra;
    qextra["k"] = config.diff_mode().to_string();
    qextra["n_queries"] = config.n_queries;
    qextra["per_category"] = r.queries_per_category;
    auto out = open_out(r.queries_path);
    write_triplets(out, w.queries, data_header(w.schema, config.seed, qextra));
    finish(out, r.queries_path);
  }
  r.items = w.catalog.size();
  r.train_items = w.split.train.size();
  r.validation_items = w.split.validation.size();
  r.queries = w.queries.size();
  return r;
}

TrainResult train(const RunConfig& config, const TrainOptions& options) {
  config.validate();
  CatalogFile cf = load_catalog(options.catalog);
  if (cf.schema.hash() != config.resolve_schema().hash()) {
    throw MismatchError("catalog schema " + cf.schema.hash() + " differs from the configured schema " +
                        config.resolve_schema().hash());
  }
  CatalogSplit split = split_from_header(cf);
  const TrainConfig tc = config.train_config();

  TrainState state;
  if (!options.resume_from.empty()) {
    LoadedCheckpoint ck = load_checkpoint(options.resume_from);
    nlohmann::ordered_json saved = config_from_manifest(ck.manifest).to_json();
    nlohmann::ordered_json now = config.to_json();
    saved.erase("epochs");
    now.erase("epochs");
    if (saved != now) throw MismatchError("resume config differs from the checkpoint's run config");
    if (ck.model.schema.hash() != cf.schema.hash()) throw MismatchError("checkpoint schema differs from catalog");
    state.model = std::move(ck.model);
    state.epoch = ck.epoch;
  } else {
    state.model = Model::init(config.model_config(), cf.schema, config.init_seed);
  }

  TrainResult result;
  result.start_epoch = state.epoch;
  const fs::path log_path = options.log.empty() ? options.checkpoint_out / "loss.jsonl" : options.log;
  const bool append = !options.resume_from.empty() && fs::exists(log_path);
  auto log = open_out(log_path, append ? std::ios::app : std::ios::trunc);
  if (!append) {
    nlohmann::ordered_json h = provenance(config, kCheckpointFormatVersion);
    h["catalog_schema_hash"] = cf.schema.hash();
    log << h.dump() << '\n';
  }

  CheckpointMeta meta;
  meta.extra["config"] = config.to_json();
  meta.extra["git_describe"] = git_describe();
  meta.extra["data_seed"] = cf.header.value("seed", std::uint64_t{0});

  auto save = [&] {
    meta.epoch = state.epoch;
    save_checkpoint(options.checkpoint_out, state.model, meta);
  };
  if (static_cast<std::size_t>(state.epoch) >= config.epochs) save();
  try {
    train_until(state, split.train, tc, config.epochs, [&](const EpochMetrics& m) {
      nlohmann::ordered_json row;
      row["epoch"] = m.epoch;
      row["mean_loss"] = m.mean_loss;
      row["lr"] = m.lr;
      row["wall_ms"] = m.wall_ms;
      log << row.dump() << '\n';
      log.flush();
      save();
      result.history.push_back(m);
    });
  } catch (const NumericError& e) {
    // Leave the offending parameters behind for inspection.
    CheckpointMeta dump = meta;
    dump.epoch = state.epoch;
    dump.extra["failure"] = e.what();
    save_checkpoint(options.checkpoint_out / "nan_dump", state.model, dump);
    throw NumericError(std::string(e.what()) + " (state dumped to " + (options.checkpoint_out / "nan_dump").string() +
                       ")");
  }
  finish(log, log_path);
  result.end_epoch = state.epoch;
  return result;
}

std::vector<EvalReport> eval(const EvalOptions& options) {
  LoadedCheckpoint ck = load_checkpoint(options.checkpoint);
  CatalogFile cf = load_catalog(options.catalog);
  TripletFile tf = load_triplets(options.queries);
  const std::string model_hash = ck.model.schema.hash();
  if (cf.header.value("schema_hash", "") != model_hash) {
    throw MismatchError("catalog schema hash " + cf.header.value("schema_hash", "") +
                        " does not match checkpoint schema hash " + model_hash);
  }
  if (tf.header.value("schema_hash", "") != model_hash) {
    throw MismatchError("query file schema hash " + tf.header.value("schema_hash", "") +
                        " does not match checkpoint schema hash " + model_hash);
  }
  CatalogSplit split = split_from_header(cf);
  GalleryIndex index = build_index(split.validation, ck.model);

  std::vector<EvalReport> reports;
  reports.push_back(evaluate(ck.model, index, split.validation, tf.triplets, options.ks, QueryMode::Composed));
  if (options.baselines) {
    reports.push_back(evaluate(ck.model, index, split.validation, tf.triplets, options.ks, QueryMode::ImageOnly));
    reports.push_back(evaluate(ck.model, index, split.validation, tf.triplets, options.ks, QueryMode::TextOnly));
  }

  if (!options.report.empty()) {
    auto out = open_out(options.report);
    nlohmann::ordered_json h = provenance(config_from_manifest(ck.manifest), kCheckpointFormatVersion);
    h["seed"] = tf.header.value("seed", std::uint64_t{0});
    h["checkpoint_epoch"] = ck.epoch;
    h["schema_hash"] = model_hash;
    h["ks"] = options.ks;
    h["gallery_items"] = index.size();
    out << h.dump() << '\n';
    for (const EvalReport& r : reports) r.write_jsonl(out);
    finish(out, options.report);
  }
  return reports;
}

std::vector<AblationReport> ablate(const RunConfig& config, const AblateOptions& options) {
  config.validate();
  std::vector<std::string> suites;
  if (options.suite == "all") suites = {"table5", "table6", "table7"};
  else suites = {options.suite};

  std::vector<AblationReport> reports;
  for (const std::string& suite : suites) {
    AblationReport r = run_ablation(config, suite, ablation_suite(suite), options.seeds, options.ks);
    if (!options.out_dir.empty()) {
      nlohmann::ordered_json h = provenance(config, kCheckpointFormatVersion);
      h["suite"] = suite;
      h["seeds"] = options.seeds;
      h["ks"] = options.ks;
      const fs::path jl = options.out_dir / ("ablation_" + suite + ".jsonl");
      auto out = open_out(jl);
      out << h.dump() << '\n';
      r.write_jsonl(out);
      finish(out, jl);
      const fs::path csv = options.out_dir / ("ablation_" + suite + ".csv");
      auto cout = open_out(csv);
      cout << "# " << h.dump() << '\n';
      r.write_csv(cout);
      finish(cout, csv);
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

AttnResult attn(const AttnOptions& options) {
  if (options.threshold < 0.0) throw InvalidArgument("threshold must be non-negative");
  LoadedCheckpoint ck = load_checkpoint(options.checkpoint);
  CatalogFile cf = load_catalog(options.catalog);
  TripletFile tf = load_triplets(options.queries);
  const std::string model_hash = ck.model.schema.hash();
  if (cf.header.value("schema_hash", "") != model_hash || tf.header.value("schema_hash", "") != model_hash) {
    throw MismatchError("data files were generated for a different schema than the checkpoint");
  }
  Model& model = ck.model;

  nlohmann::ordered_json h = provenance(config_from_manifest(ck.manifest), kCheckpointFormatVersion);
  h["seed"] = tf.header.value("seed", std::uint64_t{0});
  h["checkpoint_epoch"] = ck.epoch;
  h["threshold"] = options.threshold;
  h["top_n"] = options.top_n;

  AttnResult r;
  r.words = top_words(model, cf.items, tf.triplets, options.threshold, options.top_n);
  r.words_csv = options.out_dir / "top_words.csv";
  {
    auto out = open_out(r.words_csv);
    out << "# " << h.dump() << '\n' << "word,count\n";
    for (const WordCount& w : r.words) out << csv_field(w.word) << ',' << w.count << '\n';
    finish(out, r.words_csv);
  }

  std::unordered_map<std::uint64_t, const AttributeItem*> by_id;
  for (const AttributeItem& it : cf.items) by_id.emplace(it.id, &it);
  auto ref_of = [&](const QueryTriplet& t) -> const AttributeItem& {
    auto it = by_id.find(t.ref_id);
    if (it == by_id.end()) throw MismatchError("query references unknown item " + std::to_string(t.ref_id));
    return *it->second;
  };

  r.heatmap_csv = options.out_dir / "heatmaps.csv";
  {
    auto out = open_out(r.heatmap_csv);
    out << "# " << h.dump() << '\n' << "query,ref_id,text,token,stage,position,raw,normalized\n";
    const std::size_t n = std::min(options.heatmaps, tf.triplets.size());
    for (std::size_t q = 0; q < n; ++q) {
      const QueryTriplet& t = tf.triplets[q];
      for (const HeatCell& c : token_heatmap(model, ref_of(t), t.text)) {
        std::ostringstream line;
        line.precision(17);
        line << q << ',' << t.ref_id << ',' << csv_field(t.text) << ',' << c.label << ',' << c.stage << ','
             << c.position << ',' << c.raw << ',' << c.normalized;
        out << line.str() << '\n';
      }
    }
    finish(out, r.heatmap_csv);
  }

  r.trace_jsonl = options.out_dir / "attention_trace.jsonl";
  {
    auto out = open_out(r.trace_jsonl);
    out << h.dump() << '\n';
    if (!tf.triplets.empty()) {
      Tape tape;
      auto query = model.embed_query(tape, ref_of(tf.triplets.front()), tf.triplets.front().text);
      query.trace.write_jsonl(out);
    }
    finish(out, r.trace_jsonl);
  }
  return r;
}

GradcheckResult gradcheck_suite(const RunConfig& config, const GradcheckOptions& options) {
  if (options.seeds == 0) throw InvalidArgument("gradcheck needs at least one seed");
  if (options.batch < 1) throw InvalidArgument("gradcheck batch must be positive");
  RunConfig small = config;
  small.d = options.d;
  small.heads = options.heads;
  small.blocks = options.blocks;
  small.embed_dim = options.embed_dim;
  small.max_text_len = options.max_text_len;
  small.dropout = 0.0;
  small.validate();
  const AttributeSchema schema = small.resolve_schema();
  const std::size_t items = static_cast<std::size_t>(std::min<std::uint64_t>(schema.combinations(), 200));

  GradcheckResult result;
  result.passed = true;
  for (std::size_t s = 0; s < options.seeds; ++s) {
    const std::uint64_t seed = config.init_seed + s;
    Catalog catalog = generate_catalog(schema, items, seed);
    Model model = Model::init(small.model_config(), schema, seed);
    std::mt19937_64 rng(seed);
    auto batch = sample_batch(catalog, schema, small.diff_mode(), options.batch, rng);
    auto params = model.parameters();
    GradCheckReport rep = check_gradients([&] { return batch_loss(model, batch, small.temperature, false); },
                                          [&] { batch_loss(model, batch, small.temperature, true); }, params,
                                          options.step);
    result.max_relative_error = std::max(result.max_relative_error, rep.max_relative_error);
    result.passed = result.passed && rep.passed(options.tolerance);
    result.seeds.push_back({seed, std::move(rep)});
  }
  return result;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size() || v < 1) throw InvalidArgument("K list entries must be positive integers");
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.empty()) throw InvalidArgument("empty K list");
  return ks;
}

}  // namespace aacl
