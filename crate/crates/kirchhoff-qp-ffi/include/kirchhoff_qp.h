#ifndef KIRCHHOFF_QP_H
#define KIRCHHOFF_QP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KqpStatus {
  KQP_STATUS_OK = 0,
  KQP_STATUS_NULL_POINTER = 1,
  KQP_STATUS_INVALID_ARGUMENT = 2,
  KQP_STATUS_CONFIG = 3,
  KQP_STATUS_IO = 4,
  KQP_STATUS_MEAN_NOT_ZERO = 5,
  KQP_STATUS_SMALL_DIVISOR = 6,
  KQP_STATUS_DOMAIN = 7,
  KQP_STATUS_NON_POSITIVE_ARGUMENT = 8,
  KQP_STATUS_NO_CONVERGENCE = 9,
  KQP_STATUS_SINGULAR = 10,
  KQP_STATUS_STEP_FAILED = 11,
  KQP_STATUS_BAD_PARAMETER = 12,
  KQP_STATUS_EXPONENT_VIOLATION = 13,
  KQP_STATUS_PANIC = 99,
} KqpStatus;

/**
 * A real function on T^nu x T^d stored by Fourier coefficients.
 */
typedef struct KqpFunction KqpFunction;

/**
 * Problem data plus solver settings.
 */
typedef struct KqpProblem KqpProblem;

/**
 * Outcome of [`kqp_solve`].
 */
typedef struct KqpSolveResult KqpSolveResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the next call.
 */
const char *kqp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *kqp_version(void);

/**
 * Frees a string returned by this library.
 *
 * # Safety
 * `s` must come from this library or be NULL.
 */
void kqp_string_free(char *s);

/**
 * Zero function on the box |l|_inf <= lphi, |j|_inf <= lx.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum KqpStatus kqp_function_new(size_t nu,
                                size_t d,
                                size_t lphi,
                                size_t lx,
                                struct KqpFunction **out);

/**
 * Parses the JSON mode list used by the command line tool.
 *
 * # Safety
 * `json` must be NUL-terminated; `out` must be valid.
 */
enum KqpStatus kqp_function_from_json(const char *json, struct KqpFunction **out);

/**
 * Serialises to JSON; free the string with [`kqp_string_free`].
 *
 * # Safety
 * `f` must be a live handle; `out` must be valid.
 */
enum KqpStatus kqp_function_to_json(const struct KqpFunction *f, char **out);

/**
 * Adds re + i im at (l, j) and its conjugate at (-l, -j), so the function stays real.
 *
 * # Safety
 * `ell` has `nu` entries and `j` has `d` entries.
 */
enum KqpStatus kqp_function_add_mode(struct KqpFunction *f,
                                     const int32_t *ell,
                                     const int32_t *j,
                                     double re,
                                     double im);

/**
 * Coefficient at (l, j); zero outside the box.
 *
 * # Safety
 * Pointers must be valid; `ell` has `nu` entries and `j` has `d` entries.
 */
enum KqpStatus kqp_function_get_mode(const struct KqpFunction *f,
                                     const int32_t *ell,
                                     const int32_t *j,
                                     double *re,
                                     double *im);

/**
 * Value at (phi, x).
 *
 * # Safety
 * `phi` has `nu` entries, `x` has `d` entries, `out` is valid.
 */
enum KqpStatus kqp_function_eval(const struct KqpFunction *f,
                                 const double *phi,
                                 const double *x,
                                 double *out);

/**
 * Sobolev norm with weight max(1, |k|_inf)^s.
 *
 * # Safety
 * Pointers must be valid.
 */
enum KqpStatus kqp_function_sobolev_norm(const struct KqpFunction *f, double s, double *out);

/**
 * # Safety
 * `f` must come from this library or be NULL; it must not be used afterwards.
 */
void kqp_function_free(struct KqpFunction *f);

/**
 * Problem from explicit data. The forcing is copied; solver settings get defaults
 * (box 8, N0 = 8, 8 steps, tol 1e-9, greedy exponents with tau = 3).
 *
 * # Safety
 * `omega_bar` has `nu` entries (nu taken from the forcing); pointers must be valid.
 */
enum KqpStatus kqp_problem_new(const double *omega_bar,
                               double gamma0,
                               double epsilon,
                               const struct KqpFunction *forcing,
                               struct KqpProblem **out);

/**
 * Problem and solver settings from a TOML configuration file.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be valid.
 */
enum KqpStatus kqp_problem_from_config(const char *path,
                                       bool override_exponents,
                                       struct KqpProblem **out);

/**
 * Overrides the Newton settings.
 *
 * # Safety
 * `p` must be a live handle.
 */
enum KqpStatus kqp_problem_set_numerics(struct KqpProblem *p,
                                        size_t box_phi,
                                        size_t box_x,
                                        double n0,
                                        uint32_t max_steps,
                                        double tol);

/**
 * # Safety
 * `p` must come from this library or be NULL.
 */
void kqp_problem_free(struct KqpProblem *p);

/**
 * ||F(lambda, u)||_s for a zero-x-mean `u`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum KqpStatus kqp_residual_norm(const struct KqpProblem *p,
                                 double lambda,
                                 const struct KqpFunction *u,
                                 double s,
                                 double *out);

/**
 * Runs the Newton iteration. Returns `Ok` with a result handle whenever the run
 * finished (converged or not); a failed step is reported by [`kqp_result_status`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum KqpStatus kqp_solve(const struct KqpProblem *p, double lambda, struct KqpSolveResult **out);

/**
 * 1 if the residual reached the tolerance.
 *
 * # Safety
 * `r` must be a live handle or NULL.
 */
bool kqp_result_converged(const struct KqpSolveResult *r);

/**
 * Status of the failing step (sets the last error), or `Ok`.
 *
 * # Safety
 * `r` must be a live handle.
 */
enum KqpStatus kqp_result_status(const struct KqpSolveResult *r);

/**
 * Number of Newton steps taken.
 *
 * # Safety
 * `r` must be a live handle or NULL.
 */
size_t kqp_result_steps(const struct KqpSolveResult *r);

/**
 * Final residual ||F||_{s0}; NaN if no residual was computed.
 *
 * # Safety
 * `r` must be a live handle or NULL.
 */
double kqp_result_residual(const struct KqpSolveResult *r);

/**
 * Copy of the computed u; free with [`kqp_function_free`].
 *
 * # Safety
 * Pointers must be valid.
 */
enum KqpStatus kqp_result_solution(const struct KqpSolveResult *r, struct KqpFunction **out);

/**
 * # Safety
 * `r` must come from this library or be NULL.
 */
void kqp_result_free(struct KqpSolveResult *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KIRCHHOFF_QP_H */
