#ifndef DELTA_UNLEARN_H
#define DELTA_UNLEARN_H

/* Generated by cbindgen from delta-unlearn-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum DuStatus {
  // Success.
  DU_OK = 0,
  // Any failure without a dedicated code (I/O, parse, tokenizer, ...).
  DU_ERR_GENERAL = 1,
  // Invalid configuration or config-file parse failure.
  DU_ERR_CONFIG = 2,
  // A frozen-model or determinism invariant was violated.
  DU_ERR_INVARIANT = 3,
  // Loss or weights became non-finite, or the lr search failed.
  DU_ERR_NUMERICAL = 4,
  // A required pointer argument was NULL or not valid UTF-8.
  DU_ERR_ARGUMENT = 5,
  // The library panicked; the handle state is unspecified.
  DU_ERR_PANIC = 6,
} DuStatus;

// Opaque scoring handle: the frozen base model combined with an offset
// pair at a fixed inference-time alpha, plus the run's tokenizer.
typedef struct DuEnsemble DuEnsemble;

// Opaque run configuration: corpus, model sizes, stage hyperparameters,
// output directory, and the global seed.
typedef struct DuRunConfig DuRunConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread. Never NULL.
const char *du_last_error_message(void);

// Default configuration writing under `out_dir` with the given seed.
// Returns NULL only if `out_dir` is NULL or not UTF-8.
//
// # Safety
// `out_dir` must be NULL or a NUL-terminated string.
struct DuRunConfig *du_run_config_new(const char *out_dir, uint64_t seed);

// Load a TOML configuration file; unspecified fields take their defaults.
// On failure writes NULL to `*out` and reports why.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be a valid pointer.
enum DuStatus du_run_config_load(const char *path, struct DuRunConfig **out);

// # Safety
// `cfg` must be NULL or a pointer from `du_run_config_new`/`_load` that
// has not been freed.
void du_run_config_free(struct DuRunConfig *cfg);

// Generate the synthetic QA corpus and tokenizer under the output
// directory.
//
// # Safety
// `cfg` must be a live configuration handle.
enum DuStatus du_gen_data(const struct DuRunConfig *cfg);

// Train both model sizes from scratch on the control mix.
//
// # Safety
// `cfg` must be a live configuration handle.
enum DuStatus du_pretrain(const struct DuRunConfig *cfg);

// Fine-tune the pretrained models until they memorize the fictitious
// set. Writes the post-memorization forget/retain ROUGE if the out
// pointers are non-NULL.
//
// # Safety
// `cfg` must be a live configuration handle; the out pointers must be
// NULL or valid.
enum DuStatus du_memorize(const struct DuRunConfig *cfg,
                          double *forget_rouge,
                          double *retain_rouge);

// Retrain the pre-memorization base without the forget set, recording
// the target the learning-rate search will match.
//
// # Safety
// `cfg` must be a live configuration handle; the out pointers must be
// NULL or valid.
enum DuStatus du_retrain(const struct DuRunConfig *cfg, double *forget_rouge, double *retain_rouge);

// Run one unlearning arm at a fixed learning rate. Writes the final
// forget ROUGE if `achieved` is non-NULL.
//
// # Safety
// `cfg` must be a live configuration handle; `achieved` must be NULL or
// valid.
enum DuStatus du_unlearn_fixed_lr(const struct DuRunConfig *cfg,
                                  double learning_rate,
                                  double *achieved);

// Run one unlearning arm with the learning rate chosen to match the
// recorded retraining target. Writes the final forget ROUGE and the
// chosen learning rate to any non-NULL out pointer.
//
// # Safety
// `cfg` must be a live configuration handle; the out pointers must be
// NULL or valid.
enum DuStatus du_unlearn_match_target(const struct DuRunConfig *cfg,
                                      double *achieved,
                                      double *chosen_lr);

// Run the whole pipeline (data through the alpha sweep) in one call.
//
// # Safety
// `cfg` must be a live configuration handle.
enum DuStatus du_repro(const struct DuRunConfig *cfg);

// Open a scoring handle over the run's checkpoints. `offset_checkpoint`
// NULL gives the before-unlearning state; otherwise it names a trained
// offset checkpoint. `alpha` is the inference-time offset strength.
//
// # Safety
// `cfg` must be a live configuration handle; `offset_checkpoint` must be
// NULL or NUL-terminated; `out` must be valid.
enum DuStatus du_ensemble_open(const struct DuRunConfig *cfg,
                               const char *offset_checkpoint,
                               double alpha,
                               struct DuEnsemble **out);

// # Safety
// `ens` must be NULL or a pointer from `du_ensemble_open` not yet freed.
void du_ensemble_free(struct DuEnsemble *ens);

// Greedy-decode an answer for `question`. On success writes a string the
// caller must release with `du_string_free`.
//
// # Safety
// `ens` must be a live ensemble handle; `question` NUL-terminated; `out`
// valid.
enum DuStatus du_ensemble_generate(const struct DuEnsemble *ens,
                                   const char *question,
                                   size_t max_new_tokens,
                                   char **out);

// Length-normalized probability the ensemble assigns to `answer` given
// `question` (geometric mean over answer tokens), written to `*prob`.
//
// # Safety
// `ens` must be a live ensemble handle; `question` and `answer`
// NUL-terminated; `prob` valid.
enum DuStatus du_ensemble_answer_probability(const struct DuEnsemble *ens,
                                             const char *question,
                                             const char *answer,
                                             double *prob);

// Release a string returned by this library.
//
// # Safety
// `s` must be NULL or a pointer previously returned through an `out`
// string parameter, freed at most once.
void du_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DELTA_UNLEARN_H */
