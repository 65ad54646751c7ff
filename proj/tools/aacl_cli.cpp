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

// aacl command-line driver. Every subcommand goes through the C API.

#include <cstdio>
#include <cstdlib>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aacl/aacl.h"

namespace {

constexpr const char* kOutDirEnv = "AACL_OUT_DIR";

// 0 success, 1 validation failure, 2 internal error.
int exit_code(aacl_status s) {
  switch (s) {
    case AACL_OK: return 0;
    case AACL_ERR_IO:
    case AACL_ERR_NUMERIC:
    case AACL_ERR_INTERNAL: return 2;
    default: return 1;
  }
}

int report(aacl_status s, char* summary, const char* what) {
  if (summary) {
    std::printf("%s\n", summary);
    aacl_string_free(summary);
  }
  if (s != AACL_OK) std::fprintf(stderr, "aacl %s: %s: %s\n", what, aacl_status_name(s), aacl_last_error());
  return exit_code(s);
}

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "aacl_out";
}

struct ConfigDeleter {
  void operator()(aacl_config_t* c) const { aacl_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<aacl_config_t, ConfigDeleter>;

// Flags shared by the commands that take a run configuration.
struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::optional<long long> seed, size, epochs;
  std::optional<std::string> k;

  void attach(CLI::App* app, bool data_flags, bool epoch_flag) {
    app->add_option("--config", path, "JSON config file with flat keys")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "Override one config key (key=value); repeatable");
    if (data_flags) {
      app->add_option("--seed", seed, "World seed");
      app->add_option("--size", size, "Catalog size");
      app->add_option("--k", k, "Attribute changes per triplet")->check(CLI::IsMember({"1", "1or2", "2"}));
    }
    if (epoch_flag) app->add_option("--epochs", epochs, "Training epochs");
  }

  // File values first, then explicit flags, then --set.
  aacl_status build(ConfigPtr& out) const {
    aacl_config_t* raw = nullptr;
    aacl_status s = path.empty() ? aacl_config_create(&raw) : aacl_config_load(path.c_str(), &raw);
    if (s != AACL_OK) return s;
    out.reset(raw);
    auto put = [&](const char* key, const std::string& v) {
      if (s == AACL_OK) s = aacl_config_set(raw, key, v.c_str());
    };
    if (seed) put("seed", std::to_string(*seed));
    if (size) put("size", std::to_string(*size));
    if (k) put("k", *k);
    if (epochs) put("epochs", std::to_string(*epochs));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::fprintf(stderr, "aacl: --set expects key=value, got '%s'\n", kv.c_str());
        return AACL_ERR_INVALID_ARGUMENT;
      }
      put(kv.substr(0, eq).c_str(), kv.substr(eq + 1));
    }
    if (s == AACL_OK) s = aacl_config_validate(raw);
    return s;
  }
};

int fail_config(aacl_status s) {
  std::fprintf(stderr, "aacl: config: %s: %s\n", aacl_status_name(s), aacl_last_error());
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"aacl - composed retrieval over a synthetic attribute world"};
  app.set_version_flag("--version", std::string(aacl_version()) + " (" + aacl_git_describe() + ")");
  app.require_subcommand(1);

  std::string out_dir = default_out_dir();

  // gen-data
  ConfigFlags gen_cfg;
  auto* gen = app.add_subcommand("gen-data", "Generate catalog.jsonl and test_queries.jsonl");
  gen_cfg.attach(gen, true, false);
  gen->add_option("--out-dir", out_dir, std::string("Output directory (default $") + kOutDirEnv + ")");

  // train
  ConfigFlags train_cfg;
  std::string train_catalog, ckpt_out, resume, train_log;
  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint bundle");
  train_cfg.attach(tr, true, true);
  tr->add_option("--catalog", train_catalog, "Catalog file (default <out-dir>/catalog.jsonl)");
  tr->add_option("--checkpoint-out", ckpt_out, "Checkpoint directory (default <out-dir>/checkpoint)");
  tr->add_option("--resume", resume, "Resume from this checkpoint");
  tr->add_option("--log", train_log, "Loss log (default <checkpoint-out>/loss.jsonl)");
  tr->add_option("--out-dir", out_dir, "Base directory for defaults");

  // eval
  std::string ev_ckpt, ev_catalog, ev_queries, ev_report, ev_klist = "1,10,50";
  bool ev_baselines = false;
  auto* ev = app.add_subcommand("eval", "Recall@K of a checkpoint on the test queries");
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint directory (default <out-dir>/checkpoint)");
  ev->add_option("--catalog", ev_catalog, "Catalog file (default <out-dir>/catalog.jsonl)");
  ev->add_option("--queries", ev_queries, "Query file (default <out-dir>/test_queries.jsonl)");
  ev->add_option("--report", ev_report, "Report file (default <out-dir>/eval.jsonl)");
  ev->add_option("--k-list", ev_klist, "Comma-separated K values");
  ev->add_flag("--baselines", ev_baselines, "Add image-only and text-only rows");
  ev->add_option("--out-dir", out_dir, "Base directory for defaults");

  // ablate
  ConfigFlags ab_cfg;
  std::string ab_suite = "table6", ab_klist = "1,10,50";
  std::size_t ab_seeds = 3;
  auto* ab = app.add_subcommand("ablate", "Run an ablation suite over several seeds");
  ab_cfg.attach(ab, true, true);
  ab->add_option("--suite", ab_suite, "table5 | table6 | table7 | all")
      ->check(CLI::IsMember({"table5", "table6", "table7", "all"}));
  ab->add_option("--seeds", ab_seeds, "Seeds per variant")->check(CLI::PositiveNumber);
  ab->add_option("--k-list", ab_klist, "Comma-separated K values");
  ab->add_option("--out-dir", out_dir, "Output directory");

  // attn
  std::string at_ckpt, at_catalog, at_queries;
  double at_threshold = 0.8;
  std::size_t at_top = 30, at_heat = 8;
  auto* at = app.add_subcommand("attn", "Attention-flow word table and token heatmaps");
  at->add_option("--checkpoint", at_ckpt, "Checkpoint directory (default <out-dir>/checkpoint)");
  at->add_option("--catalog", at_catalog, "Catalog file (default <out-dir>/catalog.jsonl)");
  at->add_option("--queries", at_queries, "Query file (default <out-dir>/test_queries.jsonl)");
  at->add_option("--threshold", at_threshold, "Normalized flow threshold")->check(CLI::Range(0.0, 1.0));
  at->add_option("--top-n", at_top, "Words in the table")->check(CLI::PositiveNumber);
  at->add_option("--heatmaps", at_heat, "Queries exported as heatmaps");
  at->add_option("--out-dir", out_dir, "Output directory");

  // gradcheck
  ConfigFlags gc_cfg;
  std::size_t gc_seeds = 20;
  double gc_tol = 1e-4;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full pipeline");
  gc_cfg.attach(gc, false, false);
  gc->add_option("--seeds", gc_seeds, "Number of seeds")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gc_tol, "Maximum relative error")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  auto or_default = [&](const std::string& v, const char* name) { return v.empty() ? out_dir + "/" + name : v; };
  char* summary = nullptr;

  if (*gen) {
    ConfigPtr cfg;
    if (aacl_status s = gen_cfg.build(cfg); s != AACL_OK) return fail_config(s);
    const aacl_status s = aacl_gen_data(cfg.get(), out_dir.c_str(), &summary);
    return report(s, summary, "gen-data");
  }
  if (*tr) {
    ConfigPtr cfg;
    if (aacl_status s = train_cfg.build(cfg); s != AACL_OK) return fail_config(s);
    const std::string catalog = or_default(train_catalog, "catalog.jsonl");
    const std::string ckpt = or_default(ckpt_out, "checkpoint");
    aacl_train_args args{catalog.c_str(), ckpt.c_str(), resume.c_str(), train_log.c_str()};
    const aacl_status s = aacl_train(cfg.get(), &args, &summary);
    return report(s, summary, "train");
  }
  if (*ev) {
    const std::string ckpt = or_default(ev_ckpt, "checkpoint");
    const std::string catalog = or_default(ev_catalog, "catalog.jsonl");
    const std::string queries = or_default(ev_queries, "test_queries.jsonl");
    const std::string rep = or_default(ev_report, "eval.jsonl");
    aacl_eval_args args{ckpt.c_str(), catalog.c_str(), queries.c_str(), rep.c_str(), ev_klist.c_str(),
                        ev_baselines ? 1 : 0};
    const aacl_status s = aacl_eval(&args, &summary);
    return report(s, summary, "eval");
  }
  if (*ab) {
    ConfigPtr cfg;
    if (aacl_status s = ab_cfg.build(cfg); s != AACL_OK) return fail_config(s);
    aacl_ablate_args args{ab_suite.c_str(), ab_seeds, ab_klist.c_str(), out_dir.c_str()};
    const aacl_status s = aacl_ablate(cfg.get(), &args, &summary);
    return report(s, summary, "ablate");
  }
  if (*at) {
    const std::string ckpt = or_default(at_ckpt, "checkpoint");
    const std::string catalog = or_default(at_catalog, "catalog.jsonl");
    const std::string queries = or_default(at_queries, "test_queries.jsonl");
    aacl_attn_args args{ckpt.c_str(), catalog.c_str(), queries.c_str(), out_dir.c_str(), at_threshold, at_top, at_heat};
    const aacl_status s = aacl_attn(&args, &summary);
    return report(s, summary, "attn");
  }
  if (*gc) {
    ConfigPtr cfg;
    if (aacl_status s = gc_cfg.build(cfg); s != AACL_OK) return fail_config(s);
    aacl_gradcheck_args args{gc_seeds, gc_tol};
    const aacl_status s = aacl_gradcheck(cfg.get(), &args, &summary);
    return report(s, summary, "gradcheck");
  }
  return 1;
}
