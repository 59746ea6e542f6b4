#ifndef MDIM_H
#define MDIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MdimStatus {
  MDIM_STATUS_OK = 0,
  MDIM_STATUS_NULL_POINTER = 1,
  MDIM_STATUS_INVALID_UTF8 = 2,
  MDIM_STATUS_INVALID_ARGUMENT = 3,
  MDIM_STATUS_IO = 4,
  MDIM_STATUS_INCOMPATIBLE = 5,
  MDIM_STATUS_CONFIG = 6,
  MDIM_STATUS_INTERNAL = 7,
  MDIM_STATUS_PANIC = 8,
} MdimStatus;

/**
 * Ontology, venue database and feature layouts.
 */
typedef struct MdimDomain MdimDomain;

/**
 * A frozen policy ensemble.
 */
typedef struct MdimEnsemble MdimEnsemble;

/**
 * Aggregate statistics over simulated dialogues.
 */
typedef struct MdimEvalStats {
  uint64_t n_dialogues;
  /**
   * Percentage of successful dialogues.
   */
  double success_rate;
  double average_length;
  double average_reward;
} MdimEvalStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string. Do not free.
 */
const char *mdim_version(void);

/**
 * Message for the last failed call on this thread, or NULL. The caller owns
 * the returned string.
 */
char *mdim_last_error(void);

/**
 * Releases a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void mdim_string_free(char *s);

/**
 * Restaurant domain with a generated database of `n_venues` venues.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage.
 */
enum MdimStatus mdim_domain_restaurant(size_t n_venues, uint64_t seed, struct MdimDomain **out);

/**
 * Length of the shared policy feature vector.
 *
 * # Safety
 * `domain` must be NULL or a live handle.
 */
size_t mdim_domain_feature_count(const struct MdimDomain *domain);

/**
 * # Safety
 * `domain` must be NULL or a handle not yet freed.
 */
void mdim_domain_free(struct MdimDomain *domain);

/**
 * Loads an ensemble directory written by training.
 *
 * # Safety
 * Pointers must be valid; `dir` NUL-terminated.
 */
enum MdimStatus mdim_ensemble_load(const struct MdimDomain *domain,
                                   const char *dir,
                                   struct MdimEnsemble **out);

/**
 * # Safety
 * Pointers must be valid; `dir` NUL-terminated.
 */
enum MdimStatus mdim_ensemble_save(const struct MdimEnsemble *ensemble, const char *dir);

/**
 * Variant label (`one_dim`, `multi_dim`, `mdim_ada`, `mdim_src`); the caller
 * owns the string. NULL for a NULL handle.
 *
 * # Safety
 * `ensemble` must be NULL or a live handle.
 */
char *mdim_ensemble_variant(const struct MdimEnsemble *ensemble);

/**
 * # Safety
 * `ensemble` must be NULL or a handle not yet freed.
 */
void mdim_ensemble_free(struct MdimEnsemble *ensemble);

/**
 * Trains according to a TOML experiment config (NULL or empty for defaults).
 * Artifacts go to `out_dir` when non-NULL. When `out_final` is non-NULL it
 * receives the final ensemble of run 0.
 *
 * # Safety
 * Pointers must be NULL or valid; strings NUL-terminated.
 */
enum MdimStatus mdim_train(const struct MdimDomain *domain,
                           const char *config_toml,
                           const char *out_dir,
                           struct MdimEnsemble **out_final);

/**
 * Evaluates `ensemble` on `n_dialogues` simulated dialogues. A positive
 * `temperature` samples actions; zero or negative selects greedily.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MdimStatus mdim_evaluate(const struct MdimDomain *domain,
                              const struct MdimEnsemble *ensemble,
                              size_t n_dialogues,
                              double error_rate,
                              double problem_rate,
                              double temperature,
                              uint64_t seed,
                              struct MdimEvalStats *out);

/**
 * Runs the hand-written reference policy against the simulator.
 *
 * # Safety
 * Pointers must be valid.
 */
enum MdimStatus mdim_simulate_scripted(const struct MdimDomain *domain,
                                       size_t n_dialogues,
                                       double error_rate,
                                       double problem_rate,
                                       uint64_t seed,
                                       struct MdimEvalStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MDIM_H */
