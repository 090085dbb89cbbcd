#ifndef CBMFEM_H
#define CBMFEM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CbmfemStatus {
  CBMFEM_STATUS_OK = 0,
  CBMFEM_STATUS_NULL_POINTER = 1,
  CBMFEM_STATUS_INVALID_UTF8 = 2,
  CBMFEM_STATUS_CONFIG = 3,
  CBMFEM_STATUS_SOLVER = 4,
  CBMFEM_STATUS_OUT_OF_RANGE = 5,
  CBMFEM_STATUS_BUFFER_TOO_SMALL = 6,
  CBMFEM_STATUS_PANIC = 7,
} CbmfemStatus;

/**
 * A parsed problem with its solver settings.
 */
typedef struct CbmfemProblem CbmfemProblem;

/**
 * Solutions on every level of a finished run.
 */
typedef struct CbmfemResult CbmfemResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next library call on the same thread.
 */
const char *cbmfem_last_error(void);

/**
 * Library version as a static string.
 */
const char *cbmfem_version(void);

/**
 * Parses a TOML problem config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum CbmfemStatus cbmfem_problem_from_toml(const char *toml, struct CbmfemProblem **out);

/**
 * Loads a built-in problem by name.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum CbmfemStatus cbmfem_problem_from_preset(const char *name, struct CbmfemProblem **out);

/**
 * Replaces a named parameter and rebuilds the problem.
 *
 * # Safety
 * `problem` must come from this library; `name` must be NUL-terminated.
 */
enum CbmfemStatus cbmfem_problem_set_parameter(struct CbmfemProblem *problem,
                                               const char *name,
                                               double value);

/**
 * Sets the finest level index.
 *
 * # Safety
 * `problem` must come from this library.
 */
enum CbmfemStatus cbmfem_problem_set_levels(struct CbmfemProblem *problem, size_t levels);

/**
 * Overrides the three filter constants; pass infinity to disable one.
 *
 * # Safety
 * `problem` must come from this library.
 */
enum CbmfemStatus cbmfem_problem_set_filters(struct CbmfemProblem *problem,
                                             double c1,
                                             double c2,
                                             double c3);

/**
 * Number of fields per solution: 1 for scalar problems, 2 for systems.
 *
 * # Safety
 * `problem` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_problem_field_count(const struct CbmfemProblem *problem, size_t *out);

/**
 * # Safety
 * `problem` must come from this library or be null; it is invalid afterwards.
 */
void cbmfem_problem_free(struct CbmfemProblem *problem);

/**
 * Runs the multilevel solver. A run that stops early still produces a
 * result holding the levels it completed; see `cbmfem_result_failure`.
 *
 * # Safety
 * `problem` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_solve(const struct CbmfemProblem *problem, struct CbmfemResult **out);

/**
 * Number of levels the run completed.
 *
 * # Safety
 * `result` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_result_level_count(const struct CbmfemResult *result, size_t *out);

/**
 * Number of solutions on `level`.
 *
 * # Safety
 * `result` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_result_solution_count(const struct CbmfemResult *result,
                                               size_t level,
                                               size_t *out);

/**
 * Copies nodal values of one field of a solution into `buf`. With a null
 * `buf` only the required length is stored in `len`.
 *
 * # Safety
 * `result` must come from this library; `len` must be writable; `buf`
 * must be null or hold `*len` doubles.
 */
enum CbmfemStatus cbmfem_result_values(const struct CbmfemResult *result,
                                       size_t level,
                                       size_t index,
                                       size_t field,
                                       double *buf,
                                       size_t *len);

/**
 * Residual norm recorded for a solution.
 *
 * # Safety
 * `result` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_result_residual(const struct CbmfemResult *result,
                                         size_t level,
                                         size_t index,
                                         double *out);

/**
 * JSON for one level; free the string with `cbmfem_string_free`.
 *
 * # Safety
 * `result` must come from this library; `out` must be writable.
 */
enum CbmfemStatus cbmfem_result_json(const struct CbmfemResult *result, size_t level, char **out);

/**
 * Why the run stopped early, or null if it completed. Owned by the result.
 *
 * # Safety
 * `result` must come from this library or be null.
 */
const char *cbmfem_result_failure(const struct CbmfemResult *result);

/**
 * # Safety
 * `result` must come from this library or be null; it is invalid afterwards.
 */
void cbmfem_result_free(struct CbmfemResult *result);

/**
 * # Safety
 * `s` must come from this library or be null.
 */
void cbmfem_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CBMFEM_H */
