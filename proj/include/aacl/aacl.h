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

/* C interface of the aacl library.
 *
 * All handles are opaque. Every fallible call returns an aacl_status; on
 * failure aacl_last_error() describes the problem (thread-local, valid until
 * the next call on the same thread). Strings returned through char** are
 * owned by the caller and released with aacl_string_free().
 */
#ifndef AACL_AACL_H_
#define AACL_AACL_H_

#include <stddef.h>

#if defined(_WIN32)
#define AACL_API __declspec(dllexport)
#else
#define AACL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aacl_status {
  AACL_OK = 0,
  AACL_ERR_INVALID_ARGUMENT = 1,
  AACL_ERR_DIMENSION = 2,
  AACL_ERR_DOMAIN = 3,
  AACL_ERR_PARSE = 4,
  AACL_ERR_IO = 5,
  AACL_ERR_NUMERIC = 6,
  AACL_ERR_MISMATCH = 7,
  AACL_ERR_CHECK_FAILED = 8,
  AACL_ERR_INTERNAL = 9
} aacl_status;

AACL_API const char* aacl_version(void);
AACL_API const char* aacl_git_describe(void);
AACL_API const char* aacl_last_error(void);
AACL_API const char* aacl_status_name(aacl_status status);
AACL_API void aacl_string_free(char* s);

/* ---- run configuration ------------------------------------------------ */

typedef struct aacl_config aacl_config_t;

AACL_API aacl_status aacl_config_create(aacl_config_t** out);
/* Reads a flat-key JSON file. */
AACL_API aacl_status aacl_config_load(const char* path, aacl_config_t** out);
AACL_API aacl_status aacl_config_set(aacl_config_t* config, const char* key, const char* value);
AACL_API aacl_status aacl_config_validate(const aacl_config_t* config);
AACL_API aacl_status aacl_config_to_json(const aacl_config_t* config, char** out_json);
AACL_API void aacl_config_destroy(aacl_config_t* config);

/* ---- pipeline commands ------------------------------------------------ */
/* out_summary may be NULL; otherwise it receives a JSON summary. */

AACL_API aacl_status aacl_gen_data(const aacl_config_t* config, const char* out_dir, char** out_summary);

typedef struct aacl_train_args {
  const char* catalog;
  const char* checkpoint_out;
  const char* resume_from; /* NULL or "" for a fresh run */
  const char* log_path;    /* NULL or "": <checkpoint_out>/loss.jsonl */
} aacl_train_args;

AACL_API aacl_status aacl_train(const aacl_config_t* config, const aacl_train_args* args, char** out_summary);

typedef struct aacl_eval_args {
  const char* checkpoint;
  const char* catalog;
  const char* queries;
  const char* report; /* NULL: no report file */
  const char* k_list; /* NULL: "1,10,50" */
  int baselines;
} aacl_eval_args;

AACL_API aacl_status aacl_eval(const aacl_eval_args* args, char** out_summary);

typedef struct aacl_ablate_args {
  const char* suite;  /* table5 | table6 | table7 | all */
  size_t seeds;       /* 0: 3 */
  const char* k_list; /* NULL: "1,10,50" */
  const char* out_dir;
} aacl_ablate_args;

AACL_API aacl_status aacl_ablate(const aacl_config_t* config, const aacl_ablate_args* args, char** out_summary);

typedef struct aacl_attn_args {
  const char* checkpoint;
  const char* catalog;
  const char* queries;
  const char* out_dir;
  double threshold; /* negative: 0.8 */
  size_t top_n;     /* 0: 30 */
  size_t heatmaps;
} aacl_attn_args;

AACL_API aacl_status aacl_attn(const aacl_attn_args* args, char** out_summary);

typedef struct aacl_gradcheck_args {
  size_t seeds;     /* 0: 20 */
  double tolerance; /* <= 0: 1e-4 */
} aacl_gradcheck_args;

/* Returns AACL_ERR_CHECK_FAILED when any relative error exceeds the
 * tolerance; the summary is filled in either case. */
AACL_API aacl_status aacl_gradcheck(const aacl_config_t* config, const aacl_gradcheck_args* args,
                                    char** out_summary);

/* ---- trained model ---------------------------------------------------- */

typedef struct aacl_model aacl_model_t;

AACL_API aacl_status aacl_model_load(const char* checkpoint_dir, aacl_model_t** out);
AACL_API size_t aacl_model_dim(const aacl_model_t* model);
/* item_json: {"category":..., "gender":..., "attributes":{slot: value}} */
AACL_API aacl_status aacl_model_embed_item(aacl_model_t* model, const char* item_json, double* out,
                                           size_t capacity);
AACL_API aacl_status aacl_model_embed_query(aacl_model_t* model, const char* item_json, const char* text,
                                            double* out, size_t capacity);
AACL_API void aacl_model_destroy(aacl_model_t* model);

#ifdef __cplusplus
}
#endif

#endif /* AACL_AACL_H_ */
