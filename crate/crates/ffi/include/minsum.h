#ifndef MINSUM_H
#define MINSUM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MinsumStatus {
  MINSUM_STATUS_OK = 0,
  MINSUM_STATUS_NULL_POINTER = 1,
  MINSUM_STATUS_INVALID_ARGUMENT = 2,
  MINSUM_STATUS_PARSE = 3,
  MINSUM_STATUS_IO = 4,
  /**
   * A message update or local minimisation was not well posed.
   */
  MINSUM_STATUS_ILL_POSED = 5,
  MINSUM_STATUS_NOT_CONVERGED = 6,
  MINSUM_STATUS_DOMAIN_BOUNDARY = 7,
  MINSUM_STATUS_NOT_POSITIVE_DEFINITE = 8,
  MINSUM_STATUS_TREE_TOO_LARGE = 9,
  MINSUM_STATUS_NON_FINITE = 10,
  MINSUM_STATUS_PANIC = 11,
} MinsumStatus;

typedef enum MinsumCertificateKind {
  MINSUM_CERTIFICATE_KIND_REFUTED = 0,
  MINSUM_CERTIFICATE_KIND_EXACT_QUADRATIC = 1,
  MINSUM_CERTIFICATE_KIND_CLOSED_FORM = 2,
  MINSUM_CERTIFICATE_KIND_SAMPLED = 3,
  /**
   * The Perron bracket straddles 1; `lambda` is its upper end.
   */
  MINSUM_CERTIFICATE_KIND_INDETERMINATE = 4,
} MinsumCertificateKind;

/**
 * Opaque problem handle.
 */
typedef struct MinsumProblem MinsumProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *minsum_last_error_message(void);

/**
 * Loads a problem file. `path` is a NUL-terminated UTF-8 string.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum MinsumStatus minsum_problem_from_file(const char *path, struct MinsumProblem **out);

/**
 * Builds `½ xᵀAx − bᵀx` from `nnz` triplets. Both `(i, j)` and `(j, i)` may
 * be given as long as they agree; one of them is enough.
 *
 * # Safety
 * `rows`, `cols`, `vals` must hold `nnz` entries, `b` must hold `n`, and
 * `out` must be a valid pointer.
 */
enum MinsumStatus minsum_problem_from_triplets(size_t n,
                                               const size_t *rows,
                                               const size_t *cols,
                                               const double *vals,
                                               size_t nnz,
                                               const double *b,
                                               struct MinsumProblem **out);

/**
 * # Safety
 * `p` must come from this library and not be freed twice. Null is a no-op.
 */
void minsum_problem_free(struct MinsumProblem *p);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
size_t minsum_problem_dimension(const struct MinsumProblem *p);

/**
 * 1 if the problem runs on parametric (quadratic) messages, 0 otherwise.
 *
 * # Safety
 * `p` must be null or a live handle.
 */
int32_t minsum_problem_is_quadratic(const struct MinsumProblem *p);

/**
 * Certifies or refutes scaled diagonal dominance. On success `*kind` is
 * `Refuted` when no `λ < 1` exists, and `*lambda` / `w` hold either the
 * certificate or the refuting Perron pair (`w` is NaN when the result is
 * `Indeterminate`). `box_lo`/`box_hi` bound the
 * sampling box for objectives without closed-form curvature bounds.
 *
 * # Safety
 * `p` must be a live handle; `kind` and `lambda` must be valid; `w` is
 * null or holds `n` doubles.
 */
enum MinsumStatus minsum_certify(const struct MinsumProblem *p,
                                 double box_lo,
                                 double box_hi,
                                 size_t samples,
                                 enum MinsumCertificateKind *kind,
                                 double *lambda,
                                 double *w);

/**
 * Runs min-sum from `x0` (null for all zeros) for at most `t_max`
 * iterations, stopping once successive estimates differ by at most `tol`
 * in the max norm. `grid_points` (0 for the default) applies to
 * non-quadratic problems. The last estimate goes to `x_out`.
 *
 * # Safety
 * `p` must be a live handle; `x0` is null or holds `n` doubles; `x_out`
 * holds `n` doubles; `iterations` and `converged` are null or valid.
 */
enum MinsumStatus minsum_solve(const struct MinsumProblem *p,
                               const double *x0,
                               size_t t_max,
                               double tol,
                               size_t grid_points,
                               double *x_out,
                               size_t *iterations,
                               int32_t *converged);

/**
 * Reference minimiser: a sparse direct solve for quadratics, damped Newton
 * from zero otherwise.
 *
 * # Safety
 * `p` must be a live handle and `x_out` must hold `n` doubles.
 */
enum MinsumStatus minsum_exact(const struct MinsumProblem *p, double *x_out);

/**
 * Compares the min-sum estimate at node `root` after `t` iterations with
 * the minimiser of the depth `t − 1` computation tree rooted there;
 * `*diff` receives the absolute difference.
 *
 * # Safety
 * `p` must be a live handle; `x0` is null or holds `n` doubles; `diff`
 * must be valid.
 */
enum MinsumStatus minsum_key_property(const struct MinsumProblem *p,
                                      const double *x0,
                                      size_t root,
                                      size_t t,
                                      size_t grid_points,
                                      double *diff);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINSUM_H */
