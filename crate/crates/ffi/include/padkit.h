#ifndef PADKIT_H
#define PADKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible entry point.
 */
typedef enum {
  PAD_STATUS_OK = 0,
  PAD_STATUS_NULL_POINTER = 1,
  PAD_STATUS_INVALID_ARGUMENT = 2,
  PAD_STATUS_IO = 3,
  /**
   * Malformed score CSV or embedding file.
   */
  PAD_STATUS_FORMAT = 4,
  /**
   * The score set cannot produce the requested metric.
   */
  PAD_STATUS_METRICS = 5,
  PAD_STATUS_PANIC = 6,
} PadStatus;

/**
 * Opaque embedding file contents.
 */
typedef struct PadEmbeddingSet PadEmbeddingSet;

/**
 * Opaque collection of labelled scores.
 */
typedef struct PadScoreSet PadScoreSet;

/**
 * Equal error rate with its interpolated and sweep thresholds.
 */
typedef struct {
  double value;
  double tau;
  double sweep_tau;
} PadEer;

/**
 * BPCER at the largest threshold whose APCER does not exceed the target.
 */
typedef struct {
  double apcer_target;
  double bpcer;
  double apcer;
  double tau;
  /**
   * True when no threshold meets the target.
   */
  bool unattained;
} PadOperatingPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null after a
 * success. The pointer stays valid until the next padkit call on the thread.
 */
const char *padkit_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *padkit_version(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library and not yet freed.
 */
void padkit_string_free(char *s);

/**
 * New empty score set. Never returns null.
 */
PadScoreSet *padkit_scores_new(void);

/**
 * # Safety
 * `set` must be null or a handle from this library that was not yet freed.
 */
void padkit_scores_free(PadScoreSet *set);

/**
 * Appends one presentation. `species` is ignored for bona fide entries and
 * required for attacks.
 *
 * # Safety
 * `set` must be a live handle; string arguments must be null or valid
 * nul-terminated strings.
 */
PadStatus padkit_scores_push(PadScoreSet *set,
                             const char *sample_id,
                             bool is_attack,
                             const char *species,
                             double score);

/**
 * Reads a `sample_id,label,pai_species,score` CSV file.
 *
 * # Safety
 * `path` must be a valid nul-terminated string and `out` a writable pointer.
 */
PadStatus padkit_scores_load(const char *path, PadScoreSet **out);

/**
 * # Safety
 * `set` must be a live handle and `out` a writable pointer.
 */
PadStatus padkit_scores_len(const PadScoreSet *set, size_t *out);

/**
 * Equal error rate. `scope` is `pooled`, `worst-case`, `species:<name>` or
 * null for pooled.
 *
 * # Safety
 * `set` must be a live handle, `scope` null or a valid string, `out` writable.
 */
PadStatus padkit_eer(const PadScoreSet *set, const char *scope, PadEer *out);

/**
 * BPCER at an APCER target in `[0, 1]`, e.g. 0.1 for BPCER10.
 *
 * # Safety
 * `set` must be a live handle, `scope` null or a valid string, `out` writable.
 */
PadStatus padkit_bpcer_at_apcer(const PadScoreSet *set,
                                double apcer_target,
                                const char *scope,
                                PadOperatingPoint *out);

/**
 * APCER of one species at `tau` (scores below `tau` count as accepted).
 *
 * # Safety
 * `set` must be a live handle, `species` a valid string, `out` writable.
 */
PadStatus padkit_apcer(const PadScoreSet *set, double tau, const char *species, double *out);

/**
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_bpcer(const PadScoreSet *set, double tau, double *out);

/**
 * Maximum per-species APCER at `tau`. When `species_out` is non-null it
 * receives the species name, to be freed with [`padkit_string_free`].
 *
 * # Safety
 * `set` must be a live handle, `out` writable, `species_out` null or writable.
 */
PadStatus padkit_worst_case_apcer(const PadScoreSet *set,
                                  double tau,
                                  double *out,
                                  char **species_out);

/**
 * Full metrics report as a JSON string, freed with [`padkit_string_free`].
 *
 * # Safety
 * `set` must be a live handle, `scope` null or a valid string, `out` writable.
 */
PadStatus padkit_report_json(const PadScoreSet *set, const char *scope, char **out);

/**
 * Reads and validates a binary embedding file.
 *
 * # Safety
 * `path` must be a valid nul-terminated string and `out` a writable pointer.
 */
PadStatus padkit_embeddings_read(const char *path, PadEmbeddingSet **out);

/**
 * # Safety
 * `set` must be null or a handle from this library that was not yet freed.
 */
void padkit_embeddings_free(PadEmbeddingSet *set);

/**
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_embeddings_dim(const PadEmbeddingSet *set, size_t *out);

/**
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_embeddings_n_samples(const PadEmbeddingSet *set, size_t *out);

/**
 * Augmented rows stored per sample in addition to the clean row.
 *
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_embeddings_replicas(const PadEmbeddingSet *set, size_t *out);

/**
 * Borrowed pointer to `dim` floats of one row; replica 0 is the clean row.
 * Valid until the set is freed.
 *
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_embeddings_row(const PadEmbeddingSet *set,
                                size_t sample,
                                size_t replica,
                                const float **out);

/**
 * Sample id at `index`, freed with [`padkit_string_free`].
 *
 * # Safety
 * `set` must be a live handle and `out` writable.
 */
PadStatus padkit_embeddings_sample_id(const PadEmbeddingSet *set, size_t index, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PADKIT_H */
