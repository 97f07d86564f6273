#ifndef ADHERE_H
#define ADHERE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible function.
typedef enum AdhereStatus {
  ADHERE_STATUS_OK = 0,
  ADHERE_STATUS_NULL_POINTER = 1,
  ADHERE_STATUS_INVALID_UTF8 = 2,
  ADHERE_STATUS_INVALID_INPUT = 3,
  ADHERE_STATUS_IO = 4,
  ADHERE_STATUS_PARSE = 5,
  ADHERE_STATUS_SEPARATION = 6,
  ADHERE_STATUS_NUMERICAL = 7,
  ADHERE_STATUS_DEGENERATE = 8,
  ADHERE_STATUS_MISSING_DATA = 9,
  ADHERE_STATUS_INFEASIBLE = 10,
  ADHERE_STATUS_BACKEND = 11,
  ADHERE_STATUS_BUFFER_TOO_SMALL = 12,
  ADHERE_STATUS_PANIC = 13,
} AdhereStatus;

// Classifier family for [`adhere_model_train`].
typedef enum AdhereModelKind {
  ADHERE_MODEL_KIND_LOGISTIC = 0,
  ADHERE_MODEL_KIND_FOREST = 1,
} AdhereModelKind;

// Synthetic or loaded cohort.
typedef struct AdhereCohort AdhereCohort;

// Trained outcome classifier with its feature encoding.
typedef struct AdhereModel AdhereModel;

// Disparity metrics for one focal group against the rest. Undefined rates are NaN.
typedef struct AdhereFairness {
  double demographic_parity;
  double tpr_diff;
  double fpr_diff;
} AdhereFairness;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or NULL. Valid until the next call.
const char *adhere_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *adhere_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void adhere_string_free(char *s);

// Draws a synthetic cohort. `config_json` may be NULL for defaults; `n` of 0
// keeps the configured size.
//
// # Safety
// `config_json` must be NULL or a valid C string; `out` must be writable.
enum AdhereStatus adhere_cohort_generate(const char *config_json,
                                         uint64_t seed,
                                         size_t n,
                                         struct AdhereCohort **out);

// Reads a cohort CSV.
//
// # Safety
// `path` must be a valid C string; `out` must be writable.
enum AdhereStatus adhere_cohort_read(const char *path, struct AdhereCohort **out);

// Writes a cohort CSV.
//
// # Safety
// `cohort` must be a live handle and `path` a valid C string.
enum AdhereStatus adhere_cohort_write(const struct AdhereCohort *cohort, const char *path);

// Number of records; 0 for NULL.
//
// # Safety
// `cohort` must be NULL or a live handle.
size_t adhere_cohort_len(const struct AdhereCohort *cohort);

// Number of records labeled non-adherent.
//
// # Safety
// `cohort` must be a live handle; `out` must be writable.
enum AdhereStatus adhere_cohort_non_adherent(const struct AdhereCohort *cohort, size_t *out);

// # Safety
// `cohort` must be NULL or a handle not yet freed.
void adhere_cohort_free(struct AdhereCohort *cohort);

// Trains an outcome classifier on a labeled cohort with default forest settings.
//
// # Safety
// `cohort` must be a live handle; `out` must be writable.
enum AdhereStatus adhere_model_train(const struct AdhereCohort *cohort,
                                     enum AdhereModelKind kind,
                                     uint64_t seed,
                                     struct AdhereModel **out);

// Writes one probability per cohort record into `out`, which holds `len` values.
//
// # Safety
// Handles must be live; `out` must point to `len` writable doubles.
enum AdhereStatus adhere_model_predict_proba(const struct AdhereModel *model,
                                             const struct AdhereCohort *cohort,
                                             double *out,
                                             size_t len);

// # Safety
// `model` must be a live handle and `path` a valid C string.
enum AdhereStatus adhere_model_save(const struct AdhereModel *model, const char *path);

// # Safety
// `path` must be a valid C string; `out` must be writable.
enum AdhereStatus adhere_model_load(const char *path, struct AdhereModel **out);

// # Safety
// `model` must be NULL or a handle not yet freed.
void adhere_model_free(struct AdhereModel *model);

// Area under the ROC curve; labels are 0 or 1.
//
// # Safety
// `scores` and `labels` must each point to `n` readable values.
enum AdhereStatus adhere_auroc(const double *scores, const uint8_t *labels, size_t n, double *out);

// Disparities of focal-group members (`group[i] == 1`) against the rest.
//
// # Safety
// The three arrays must each hold `n` readable values.
enum AdhereStatus adhere_fairness(const uint8_t *group,
                                  const uint8_t *label,
                                  const uint8_t *predicted,
                                  size_t n,
                                  struct AdhereFairness *out);

// Full versus adherent-only effect estimates as a JSON document. `options_json`
// may be NULL for defaults. Free the result with [`adhere_string_free`].
//
// # Safety
// `cohort` must be a live handle; `options_json` NULL or a valid C string;
// `out_json` writable.
enum AdhereStatus adhere_ate_comparison_json(const struct AdhereCohort *cohort,
                                             const char *options_json,
                                             char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADHERE_H */
