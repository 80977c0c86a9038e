#ifndef CQCC_ARTIFACT_H
#define CQCC_ARTIFACT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  CQCC_STATUS_OK = 0,
  CQCC_STATUS_NULL_ARGUMENT = 1,
  CQCC_STATUS_INVALID_UTF8 = 2,
  CQCC_STATUS_FILE_NOT_FOUND = 3,
  CQCC_STATUS_IO = 4,
  CQCC_STATUS_UNSUPPORTED_AUDIO = 5,
  CQCC_STATUS_INVALID_SIGNAL = 6,
  CQCC_STATUS_INVALID_CONFIG = 7,
  CQCC_STATUS_MODEL_FORMAT = 8,
  CQCC_STATUS_EMPTY_POPULATION = 9,
  CQCC_STATUS_NUMERICAL = 10,
  CQCC_STATUS_INTERNAL = 11,
} CqccStatus;

/**
 * Opaque handle to a loaded detector model.
 */
typedef struct CqccModel CqccModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, empty if none. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *cqcc_last_error(void);

/**
 * Load a model file. On success `*out` owns a handle to release with
 * [`cqcc_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
CqccStatus cqcc_model_load(const char *path, CqccModel **out);

/**
 * Release a handle from [`cqcc_model_load`]. Null is ignored.
 *
 * # Safety
 * `model` must be null or a live handle not freed before.
 */
void cqcc_model_free(CqccModel *model);

/**
 * Sample rate the model's front end analyses at; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
uint32_t cqcc_model_sample_rate(const CqccModel *model);

/**
 * Shortest input, in samples at the model's rate, that can be scored.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t cqcc_model_min_samples(const CqccModel *model);

/**
 * Log-likelihood ratio of a mono WAV file; higher means more natural.
 *
 * # Safety
 * `model` must be a live handle, `path` a NUL-terminated string and
 * `out_llr` a writable pointer.
 */
CqccStatus cqcc_model_score_wav(const CqccModel *model, const char *path, double *out_llr);

/**
 * Log-likelihood ratio of mono samples in [-1, 1]; resampled if
 * `sample_rate` differs from the model's.
 *
 * # Safety
 * `model` must be a live handle, `samples` valid for `len` reads and
 * `out_llr` a writable pointer.
 */
CqccStatus cqcc_model_score_samples(const CqccModel *model,
                                    const double *samples,
                                    size_t len,
                                    uint32_t sample_rate,
                                    double *out_llr);

/**
 * Equal error rate in percent and its threshold. Bona fide trials are
 * expected to score higher than spoofed ones.
 *
 * # Safety
 * `bona` and `spoof` must be valid for their lengths; the out-pointers
 * must be writable, `out_threshold` may be null.
 */
CqccStatus cqcc_eer(const double *bona,
                    size_t n_bona,
                    const double *spoof,
                    size_t n_spoof,
                    double *out_eer_percent,
                    double *out_threshold);

/**
 * Opinion-scale rendering of an EER in percent, clamped to [0, 5].
 */
double cqcc_machine_opinion_score(double eer_percent);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cqcc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CQCC_ARTIFACT_H */
