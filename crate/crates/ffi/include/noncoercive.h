#ifndef NONCOERCIVE_H
#define NONCOERCIVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NcStatus {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_INVALID_ARGUMENT = 2,
  NC_STATUS_CONFIG = 3,
  NC_STATUS_DISTANCE_TOO_LARGE = 4,
  NC_STATUS_NOT_CONVERGED = 5,
  NC_STATUS_NOT_ADMISSIBLE = 6,
  NC_STATUS_MESH_MISMATCH = 7,
  NC_STATUS_IO = 8,
  NC_STATUS_BUFFER_TOO_SMALL = 9,
  NC_STATUS_PANIC = 10,
} NcStatus;

typedef struct NcCaseResult NcCaseResult;

/**
 * A parsed run configuration with a problem section.
 */
typedef struct NcProblem NcProblem;

typedef struct NcSolution NcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *nc_last_error(void);

/**
 * Library version as a static string.
 */
const char *nc_version(void);

/**
 * Parses a JSON run configuration that contains a `problem` section.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum NcStatus nc_problem_from_json(const char *json, struct NcProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`nc_problem_from_json`] not yet freed.
 */
void nc_problem_free(struct NcProblem *problem);

/**
 * Number of mesh nodes, 0 for a null handle.
 *
 * # Safety
 * `problem` must be null or a live handle.
 */
size_t nc_problem_node_count(const struct NcProblem *problem);

/**
 * Runs the truncation scheme, as an obstacle problem when the configuration
 * has an obstacle.
 *
 * # Safety
 * `problem` must be a live handle and `out` a valid pointer.
 */
enum NcStatus nc_solve(const struct NcProblem *problem, struct NcSolution **out);

/**
 * # Safety
 * `solution` must be null or a live handle.
 */
size_t nc_solution_len(const struct NcSolution *solution);

/**
 * Copies the nodal values into `buf`, which must hold `nc_solution_len` values.
 *
 * # Safety
 * `solution` must be a live handle and `buf` valid for `len` writes.
 */
enum NcStatus nc_solution_values(const struct NcSolution *solution, double *buf, size_t len);

/**
 * Solve report as JSON, owned by the handle.
 *
 * # Safety
 * `solution` must be null or a live handle.
 */
const char *nc_solution_report_json(const struct NcSolution *solution);

/**
 * # Safety
 * `solution` must be null or a handle from [`nc_solve`] not yet freed.
 */
void nc_solution_free(struct NcSolution *solution);

/**
 * Distance to `L^∞` in `L^{p,∞}` of a weighted sample set.
 *
 * # Safety
 * `values` and `weights` must be valid for `n` reads, `out` for one write.
 */
enum NcStatus nc_dist_to_bounded(const double *values,
                                 const double *weights,
                                 size_t n,
                                 double p,
                                 double tol,
                                 double *out);

/**
 * `‖f‖_{p,q}` of a weighted sample set; `q = INFINITY` selects the weak space.
 *
 * # Safety
 * `values` and `weights` must be valid for `n` reads, `out` for one write.
 */
enum NcStatus nc_lorentz_norm(const double *values,
                              const double *weights,
                              size_t n,
                              double p,
                              double q,
                              double *out);

/**
 * Runs a verification case. `params_json` is a JSON object of case
 * parameters, or null for the defaults.
 *
 * # Safety
 * `name` must be a valid string, `params_json` null or a valid string, `out`
 * a valid pointer.
 */
enum NcStatus nc_verify(const char *name, const char *params_json, struct NcCaseResult **out);

/**
 * 0 for pass, 2 for record-only deviations, 1 for failed checks; -1 for null.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
int32_t nc_case_status(const struct NcCaseResult *result);

/**
 * Case result as JSON, owned by the handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
const char *nc_case_json(const struct NcCaseResult *result);

/**
 * # Safety
 * `result` must be null or a handle from [`nc_verify`] not yet freed.
 */
void nc_case_free(struct NcCaseResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONCOERCIVE_H */
