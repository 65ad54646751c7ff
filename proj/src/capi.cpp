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

#include "aacl/aacl.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "aacl/error.hpp"
#include "aacl/pipeline.hpp"

struct aacl_config {
  aacl::RunConfig config;
};

struct aacl_model {
  aacl::Model model;
};

namespace {

thread_local std::string g_last_error;

aacl_status status_of(aacl::ErrorKind kind) {
  switch (kind) {
    case aacl::ErrorKind::InvalidArgument: return AACL_ERR_INVALID_ARGUMENT;
    case aacl::ErrorKind::Dimension: return AACL_ERR_DIMENSION;
    case aacl::ErrorKind::Domain: return AACL_ERR_DOMAIN;
    case aacl::ErrorKind::Parse: return AACL_ERR_PARSE;
    case aacl::ErrorKind::Io: return AACL_ERR_IO;
    case aacl::ErrorKind::Numeric: return AACL_ERR_NUMERIC;
    case aacl::ErrorKind::Mismatch: return AACL_ERR_MISMATCH;
    case aacl::ErrorKind::CheckFailed: return AACL_ERR_CHECK_FAILED;
    case aacl::ErrorKind::Internal: return AACL_ERR_INTERNAL;
  }
  return AACL_ERR_INTERNAL;
}

template <typename F>
aacl_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const aacl::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return AACL_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return AACL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AACL_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return AACL_ERR_INTERNAL;
  }
}

aacl_status fail(aacl_status s, const char* message) {
  g_last_error = message;
  return s;
}

void emit(char** out, const nlohmann::ordered_json& j) {
  if (!out) return;
  const std::string text = j.dump();
  char* buf = static_cast<char*>(std::malloc(text.size() + 1));
  if (!buf) throw std::bad_alloc();
  std::memcpy(buf, text.c_str(), text.size() + 1);
  *out = buf;
}

std::string str(const char* s) { return s ? std::string(s) : std::string(); }

nlohmann::ordered_json report_json(const aacl::EvalReport& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json j;
    j["category"] = row.category;
    for (std::size_t k : r.ks) j["R@" + std::to_string(k)] = row.recall.at(k);
    j["n_queries"] = row.n_queries;
    rows.push_back(j);
  }
  return {{"model", r.model_label}, {"rows", rows}};
}

}  // namespace

extern "C" {

const char* aacl_version(void) { return aacl::library_version(); }
const char* aacl_git_describe(void) { return aacl::git_describe(); }
const char* aacl_last_error(void) { return g_last_error.c_str(); }

const char* aacl_status_name(aacl_status status) {
  switch (status) {
    case AACL_OK: return "ok";
    case AACL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case AACL_ERR_DIMENSION: return "dimension error";
    case AACL_ERR_DOMAIN: return "domain error";
    case AACL_ERR_PARSE: return "parse error";
    case AACL_ERR_IO: return "i/o error";
    case AACL_ERR_NUMERIC: return "numeric error";
    case AACL_ERR_MISMATCH: return "mismatch";
    case AACL_ERR_CHECK_FAILED: return "check failed";
    case AACL_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void aacl_string_free(char* s) { std::free(s); }

aacl_status aacl_config_create(aacl_config_t** out) {
  if (!out) return fail(AACL_ERR_INVALID_ARGUMENT, "null output handle");
  return guarded([&] {
    *out = new aacl_config{};
    return AACL_OK;
  });
}

aacl_status aacl_config_load(const char* path, aacl_config_t** out) {
  if (!path || !out) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new aacl_config{aacl::RunConfig::load(path)};
    return AACL_OK;
  });
}

aacl_status aacl_config_set(aacl_config_t* config, const char* key, const char* value) {
  if (!config || !key || !value) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    config->config.set(key, value);
    return AACL_OK;
  });
}

aacl_status aacl_config_validate(const aacl_config_t* config) {
  if (!config) return fail(AACL_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    config->config.validate();
    return AACL_OK;
  });
}

aacl_status aacl_config_to_json(const aacl_config_t* config, char** out_json) {
  if (!config || !out_json) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    emit(out_json, config->config.to_json());
    return AACL_OK;
  });
}

void aacl_config_destroy(aacl_config_t* config) { delete config; }

aacl_status aacl_gen_data(const aacl_config_t* config, const char* out_dir, char** out_summary) {
  if (!config || !out_dir) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    aacl::GenDataResult r = aacl::gen_data(config->config, out_dir);
    emit(out_summary, {{"catalog", r.catalog_path.string()},
                       {"queries", r.queries_path.string()},
                       {"items", r.items},
                       {"train_items", r.train_items},
                       {"validation_items", r.validation_items},
                       {"n_queries", r.queries},
                       {"queries_per_category", r.queries_per_category}});
    return AACL_OK;
  });
}

aacl_status aacl_train(const aacl_config_t* config, const aacl_train_args* args, char** out_summary) {
  if (!config || !args || !args->catalog || !args->checkpoint_out) {
    return fail(AACL_ERR_INVALID_ARGUMENT, "train needs a config, a catalog and a checkpoint path");
  }
  return guarded([&] {
    aacl::TrainOptions o;
    o.catalog = args->catalog;
    o.checkpoint_out = args->checkpoint_out;
    o.resume_from = str(args->resume_from);
    o.log = str(args->log_path);
    aacl::TrainResult r = aacl::train(config->config, o);
    nlohmann::ordered_json hist = nlohmann::ordered_json::array();
    for (const auto& m : r.history) hist.push_back({{"epoch", m.epoch}, {"mean_loss", m.mean_loss}, {"lr", m.lr}});
    emit(out_summary, {{"start_epoch", r.start_epoch}, {"end_epoch", r.end_epoch}, {"history", hist}});
    return AACL_OK;
  });
}

aacl_status aacl_eval(const aacl_eval_args* args, char** out_summary) {
  if (!args || !args->checkpoint || !args->catalog || !args->queries) {
    return fail(AACL_ERR_INVALID_ARGUMENT, "eval needs a checkpoint, a catalog and a query file");
  }
  return guarded([&] {
    aacl::EvalOptions o;
    o.checkpoint = args->checkpoint;
    o.catalog = args->catalog;
    o.queries = args->queries;
    o.report = str(args->report);
    if (args->k_list) o.ks = aacl::parse_k_list(args->k_list);
    o.baselines = args->baselines != 0;
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : aacl::eval(o)) out.push_back(report_json(r));
    emit(out_summary, {{"reports", out}});
    return AACL_OK;
  });
}

aacl_status aacl_ablate(const aacl_config_t* config, const aacl_ablate_args* args, char** out_summary) {
  if (!config || !args) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    aacl::AblateOptions o;
    if (args->suite) o.suite = args->suite;
    if (args->seeds) o.seeds = args->seeds;
    if (args->k_list) o.ks = aacl::parse_k_list(args->k_list);
    o.out_dir = str(args->out_dir);
    nlohmann::ordered_json suites = nlohmann::ordered_json::array();
    for (const auto& rep : aacl::ablate(config->config, o)) {
      nlohmann::ordered_json rows = nlohmann::ordered_json::array();
      for (const auto& row : rep.rows) {
        nlohmann::ordered_json j;
        j["variant"] = row.variant;
        if (!row.error.empty()) {
          j["error"] = row.error;
        } else {
          for (std::size_t k : rep.ks) {
            j["R@" + std::to_string(k)] = row.mean.at("Average").at(k);
            j["R@" + std::to_string(k) + "_sd"] = row.sd.at("Average").at(k);
          }
        }
        rows.push_back(j);
      }
      suites.push_back({{"suite", rep.suite}, {"rows", rows}});
    }
    emit(out_summary, {{"suites", suites}});
    return AACL_OK;
  });
}

aacl_status aacl_attn(const aacl_attn_args* args, char** out_summary) {
  if (!args || !args->checkpoint || !args->catalog || !args->queries || !args->out_dir) {
    return fail(AACL_ERR_INVALID_ARGUMENT, "attn needs a checkpoint, a catalog, a query file and an output dir");
  }
  return guarded([&] {
    aacl::AttnOptions o;
    o.checkpoint = args->checkpoint;
    o.catalog = args->catalog;
    o.queries = args->queries;
    o.out_dir = args->out_dir;
    if (args->threshold >= 0.0) o.threshold = args->threshold;
    if (args->top_n) o.top_n = args->top_n;
    o.heatmaps = args->heatmaps;
    aacl::AttnResult r = aacl::attn(o);
    nlohmann::ordered_json words = nlohmann::ordered_json::array();
    for (const auto& w : r.words) words.push_back({{"word", w.word}, {"count", w.count}});
    emit(out_summary, {{"top_words", words},
                       {"words_csv", r.words_csv.string()},
                       {"heatmap_csv", r.heatmap_csv.string()},
                       {"trace_jsonl", r.trace_jsonl.string()}});
    return AACL_OK;
  });
}

aacl_status aacl_gradcheck(const aacl_config_t* config, const aacl_gradcheck_args* args, char** out_summary) {
  if (!config) return fail(AACL_ERR_INVALID_ARGUMENT, "null config");
  return guarded([&] {
    aacl::GradcheckOptions o;
    if (args && args->seeds) o.seeds = args->seeds;
    if (args && args->tolerance > 0.0) o.tolerance = args->tolerance;
    aacl::GradcheckResult r = aacl::gradcheck_suite(config->config, o);
    nlohmann::ordered_json seeds = nlohmann::ordered_json::array();
    for (const auto& s : r.seeds) {
      seeds.push_back({{"seed", s.seed},
                       {"max_relative_error", s.report.max_relative_error},
                       {"worst_parameter", s.report.worst_parameter},
                       {"worst_index", s.report.worst_index},
                       {"coordinates", s.report.coordinates}});
    }
    emit(out_summary, {{"tolerance", o.tolerance},
                       {"max_relative_error", r.max_relative_error},
                       {"passed", r.passed},
                       {"seeds", seeds}});
    if (!r.passed) {
      g_last_error = "gradient check failed: max relative error " + std::to_string(r.max_relative_error);
      return AACL_ERR_CHECK_FAILED;
    }
    return AACL_OK;
  });
}

aacl_status aacl_model_load(const char* checkpoint_dir, aacl_model_t** out) {
  if (!checkpoint_dir || !out) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new aacl_model{aacl::load_checkpoint(checkpoint_dir).model};
    return AACL_OK;
  });
}

size_t aacl_model_dim(const aacl_model_t* model) { return model ? model->model.config.encoder.d : 0; }

static aacl_status copy_out(const aacl::Tensor& v, double* out, size_t capacity) {
  if (capacity < v.size()) return fail(AACL_ERR_DIMENSION, "output buffer smaller than the embedding width");
  std::memcpy(out, v.values().data(), v.size() * sizeof(double));
  return AACL_OK;
}

aacl_status aacl_model_embed_item(aacl_model_t* model, const char* item_json, double* out, size_t capacity) {
  if (!model || !item_json || !out) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto item = aacl::item_from_json(nlohmann::json::parse(item_json), model->model.schema);
    return copy_out(model->model.image_vector(item), out, capacity);
  });
}

aacl_status aacl_model_embed_query(aacl_model_t* model, const char* item_json, const char* text, double* out,
                                   size_t capacity) {
  if (!model || !item_json || !text || !out) return fail(AACL_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    auto item = aacl::item_from_json(nlohmann::json::parse(item_json), model->model.schema);
    return copy_out(model->model.query_vector(item, text), out, capacity);
  });
}

void aacl_model_destroy(aacl_model_t* model) { delete model; }

}  // extern "C"
