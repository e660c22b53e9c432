// Copyright 2026 The noe Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


/* C interface to the noe library. Every object is an opaque handle owned by
 * the caller and released with its _free function. Functions return a
 * noe_status; on failure noe_last_error() describes the problem. Strings
 * returned through char** are allocated by the library and released with
 * noe_string_free. */

#ifndef NOE_NOE_H_
#define NOE_NOE_H_

#include <stdint.h>

#if defined(_WIN32)
#define NOE_API __declspec(dllexport)
#else
#define NOE_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum noe_status {
  NOE_OK = 0,
  NOE_ERR_VALIDATION = 1, /* bad input or configuration */
  NOE_ERR_RUNTIME = 2,    /* I/O, divergence, unreachable privacy target */
} noe_status;

typedef struct noe_corpus noe_corpus;
typedef struct noe_model noe_model; /* parameters plus checkpoint metadata */

NOE_API const char* noe_version(void);
NOE_API uint32_t noe_checkpoint_format_version(void);
/* Message of the last failure on the calling thread ("" if none). */
NOE_API const char* noe_last_error(void);
NOE_API void noe_string_free(char* s);
/* Worker threads for batch-parallel work; n <= 0 restores the default. */
NOE_API void noe_set_threads(int n);

/* ---- corpora ---- */

/* spec_json: synthetic generator fields (see README). The result is split
 * per domain with the given test fraction (0 keeps everything as train). */
NOE_API noe_status noe_corpus_generate(const char* spec_json,
                                       double test_fraction, uint64_t seed,
                                       noe_corpus** out);
/* Public pretraining corpus over the same vocabulary as spec_json. */
NOE_API noe_status noe_corpus_generate_public(const char* spec_json,
                                              int num_docs, int max_tokens,
                                              noe_corpus** out);
NOE_API noe_status noe_corpus_load(const char* path, noe_corpus** out);
/* Writes JSON Lines plus a sibling .manifest.json. */
NOE_API noe_status noe_corpus_save(const noe_corpus* corpus, const char* path);
NOE_API noe_status noe_corpus_manifest(const noe_corpus* corpus, char** json);
NOE_API void noe_corpus_free(noe_corpus* corpus);

/* ---- models and checkpoints ---- */

NOE_API noe_status noe_model_load(const char* path, noe_model** out);
NOE_API noe_status noe_model_save(const noe_model* model, const char* path);
NOE_API noe_status noe_model_metadata(const noe_model* model, char** json);
/* Checkpoint section names as a JSON array. */
NOE_API noe_status noe_model_sections(const noe_model* model, char** json);
NOE_API void noe_model_free(noe_model* model);

/* options_json: {"steps", "batch", "eta", "warmup", "seed"}; model_json is
 * a model configuration block. metrics_jsonl may be NULL. */
NOE_API noe_status noe_pretrain(const noe_corpus* public_corpus,
                                const char* model_json,
                                const char* options_json, noe_model** out,
                                char** metrics_jsonl);
/* Mean next-token loss over the first window of every document. */
NOE_API noe_status noe_held_out_loss(const noe_model* model,
                                     const noe_corpus* corpus, double* out);

/* Noise multiplier record {epsilon, delta, q, steps, sigma,
 * minimizing_order, ...}. */
NOE_API noe_status noe_calibrate(double epsilon, double delta, int64_t batch,
                                 int64_t dataset_size, int64_t steps,
                                 char** json);

/* Validates a run configuration and returns it normalized. A relative
 * "backbone" path is resolved against base_dir (may be NULL). seed >= 0
 * overrides the configured seed. */
NOE_API noe_status noe_config_normalize(const char* config_json,
                                        const char* base_dir, int64_t seed,
                                        char** normalized_json);

/* Trains the configured variant. Outputs go to out_dir (metrics.jsonl,
 * summary.json, checkpoints, manifest.json). The backbone is loaded from the
 * config's "backbone" path; without one a random backbone is used. */
NOE_API noe_status noe_train(const char* config_json, const noe_corpus* corpus,
                             const char* out_dir, char** summary_json);

/* Per-domain test accuracy report. */
NOE_API noe_status noe_evaluate(const noe_model* model,
                                const noe_corpus* corpus, char** report_json);

/* Cross-domain membership inference with the deployed model of `attacker`
 * against the train/test documents of `target`. roc_csv may be NULL. */
NOE_API noe_status noe_attack(const noe_model* model, const noe_corpus* corpus,
                              int attacker, int target, char** report_json,
                              char** roc_csv);

/* surgery: "remove_shared_prompts" or "remove_domain_experts". */
NOE_API noe_status noe_ablate(const noe_model* model, const char* surgery,
                              noe_model** out);
/* Single-domain deployable model. */
NOE_API noe_status noe_export(const noe_model* model, int domain,
                              noe_model** out);

/* Per-token correctness of model_a against model_b on one test document,
 * rendered as ANSI text (html = 0) or an HTML page (html = 1). */
NOE_API noe_status noe_diff(const noe_model* model_a, const noe_model* model_b,
                            const noe_corpus* corpus, int64_t doc_id, int html,
                            char** out);

#ifdef __cplusplus
}
#endif

#endif /* NOE_NOE_H_ */
