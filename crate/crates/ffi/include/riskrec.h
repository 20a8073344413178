#ifndef RISKREC_H
#define RISKREC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_ARGUMENT = 2,
  RR_STATUS_PARSE = 3,
  RR_STATUS_IO = 4,
  RR_STATUS_INVARIANT = 5,
  RR_STATUS_PANIC = 6,
} RrStatus;

typedef struct RrCoverage RrCoverage;

typedef struct RrFaultMatrix RrFaultMatrix;

typedef struct RrFrequencyScores RrFrequencyScores;

typedef struct RrRatingMatrix RrRatingMatrix;

typedef struct RrRiskTable RrRiskTable;

typedef struct RrSuite RrSuite;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * Message for the most recent failure on this thread, or NULL if none.
 * Valid until the next failing call on the same thread.
 */
const char *rr_last_error_message(void);

struct RrRatingMatrix *rr_rating_matrix_new(void);

/**
 * Adds `count` accesses of `component` by `user`.
 *
 * # Safety
 * `matrix` must be a live handle; the strings must be valid C strings.
 */
enum RrStatus rr_rating_matrix_record(struct RrRatingMatrix *matrix,
                                      const char *user,
                                      const char *component,
                                      uint32_t count);

/**
 * # Safety
 * `path` must be a valid C string and `out` writable.
 */
enum RrStatus rr_rating_matrix_load_csv(const char *path, struct RrRatingMatrix **out);

/**
 * # Safety
 * `matrix` must be NULL or a handle not yet freed.
 */
void rr_rating_matrix_free(struct RrRatingMatrix *matrix);

/**
 * Completes the matrix with `neighbors` nearest components and derives
 * min-max scaled frequency scores.
 *
 * # Safety
 * `matrix` must be a live handle and `out` writable.
 */
enum RrStatus rr_frequency_scores(const struct RrRatingMatrix *matrix,
                                  size_t neighbors,
                                  struct RrFrequencyScores **out);

/**
 * Scaled frequency of `component`.
 *
 * # Safety
 * `scores` must be a live handle, `component` a valid C string and `out`
 * writable.
 */
enum RrStatus rr_frequency_get(const struct RrFrequencyScores *scores,
                               const char *component,
                               double *out);

/**
 * # Safety
 * `scores` must be NULL or a handle not yet freed.
 */
void rr_frequency_free(struct RrFrequencyScores *scores);

struct RrRiskTable *rr_risk_table_new(void);

/**
 * Sets a component's frequency `f` and change risk `i`; `r = f * i`.
 *
 * # Safety
 * `table` must be a live handle and `component` a valid C string.
 */
enum RrStatus rr_risk_table_insert(struct RrRiskTable *table,
                                   const char *component,
                                   double f,
                                   double i);

/**
 * # Safety
 * `path` must be a valid C string and `out` writable.
 */
enum RrStatus rr_risk_table_load_csv(const char *path, struct RrRiskTable **out);

/**
 * # Safety
 * `table` must be NULL or a handle not yet freed.
 */
void rr_risk_table_free(struct RrRiskTable *table);

/**
 * Empty coverage over the given component and test ids.
 *
 * # Safety
 * Each list must hold `n_*` valid C strings; `out` must be writable.
 */
enum RrStatus rr_coverage_new(const char *const *components,
                              size_t n_components,
                              const char *const *tests,
                              size_t n_tests,
                              struct RrCoverage **out);

/**
 * # Safety
 * `coverage` must be a live handle; the strings must be valid C strings.
 */
enum RrStatus rr_coverage_set(struct RrCoverage *coverage,
                              const char *test,
                              const char *component,
                              bool covered);

/**
 * # Safety
 * `path` must be a valid C string and `out` writable.
 */
enum RrStatus rr_coverage_load_csv(const char *path, struct RrCoverage **out);

/**
 * # Safety
 * `coverage` must be NULL or a handle not yet freed.
 */
void rr_coverage_free(struct RrCoverage *coverage);

/**
 * Orders the tests of `coverage` with `technique` (`hcf`, `ch`, `mfm`,
 * `random` or `greedy`). `seed` only affects `random`.
 *
 * # Safety
 * `table` and `coverage` must be live handles, `technique` a valid C string
 * and `out` writable.
 */
enum RrStatus rr_prioritize(const struct RrRiskTable *table,
                            const struct RrCoverage *coverage,
                            const char *technique,
                            uint64_t seed,
                            struct RrSuite **out);

/**
 * Number of tests in `suite`, 0 for NULL.
 *
 * # Safety
 * `suite` must be NULL or a live handle.
 */
size_t rr_suite_len(const struct RrSuite *suite);

/**
 * Test id at 0-based `position`, or NULL when out of range.
 *
 * # Safety
 * `suite` must be NULL or a live handle.
 */
const char *rr_suite_test_id(const struct RrSuite *suite, size_t position);

/**
 * # Safety
 * `suite` must be NULL or a handle not yet freed.
 */
void rr_suite_free(struct RrSuite *suite);

/**
 * Fault matrix over the given test and fault ids with no detections.
 *
 * # Safety
 * Each list must hold `n_*` valid C strings; `out` must be writable.
 */
enum RrStatus rr_fault_matrix_new(const char *const *tests,
                                  size_t n_tests,
                                  const char *const *faults,
                                  size_t n_faults,
                                  struct RrFaultMatrix **out);

/**
 * # Safety
 * `matrix` must be a live handle; the strings must be valid C strings.
 */
enum RrStatus rr_fault_matrix_set(struct RrFaultMatrix *matrix,
                                  const char *test,
                                  const char *fault,
                                  bool detects);

/**
 * # Safety
 * `path` must be a valid C string and `out` writable.
 */
enum RrStatus rr_fault_matrix_load_csv(const char *path, struct RrFaultMatrix **out);

/**
 * # Safety
 * `matrix` must be NULL or a handle not yet freed.
 */
void rr_fault_matrix_free(struct RrFaultMatrix *matrix);

/**
 * APFD of `suite`; every fault must be detected by some test.
 *
 * # Safety
 * `suite` and `faults` must be live handles and `out` writable.
 */
enum RrStatus rr_apfd(const struct RrSuite *suite, const struct RrFaultMatrix *faults, double *out);

/**
 * NAPFD of `suite` when only the first `budget_fraction` of it runs.
 *
 * # Safety
 * `suite` and `faults` must be live handles and `out` writable.
 */
enum RrStatus rr_napfd(const struct RrSuite *suite,
                       const struct RrFaultMatrix *faults,
                       double budget_fraction,
                       double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKREC_H */
