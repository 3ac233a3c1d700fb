#ifndef CCAMA_H
#define CCAMA_H

/* Generated by cbindgen; do not edit. */

#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum CcamaStatus {
  CCAMA_STATUS_OK = 0,
  /**
   * The solver stopped at its iteration cap; the solution handle is still valid.
   */
  CCAMA_STATUS_NOT_CONVERGED = 2,
  CCAMA_STATUS_INVALID_INPUT = 3,
  CCAMA_STATUS_NUMERICAL_FAILURE = 4,
  CCAMA_STATUS_NULL_POINTER = 5,
  CCAMA_STATUS_BUFFER_TOO_SMALL = 6,
  CCAMA_STATUS_PANIC = 7,
} CcamaStatus;

typedef enum CcamaStepMode {
  CCAMA_STEP_MODE_BB_BACKTRACKING = 0,
  CCAMA_STEP_MODE_BACKTRACKING = 1,
  /**
   * Uses `rho` as the constant step; `rho <= 0` picks the Lipschitz-based default.
   */
  CCAMA_STEP_MODE_FIXED = 2,
} CcamaStepMode;

/**
 * Opaque problem instance.
 */
typedef struct CcamaInstance CcamaInstance;

/**
 * Opaque solver result.
 */
typedef struct CcamaSolution CcamaSolution;

typedef struct CcamaAmaOptions {
  double eps_gap;
  double eps_primal;
  double beta;
  double rho;
  size_t max_iter;
  size_t max_backtracks;
  enum CcamaStepMode step;
  /**
   * Nonzero: stop when either tolerance holds instead of both.
   */
  int32_t stop_either;
} CcamaAmaOptions;

typedef struct CcamaAdmmOptions {
  double rho;
  double mu_safety;
  double inner_tol;
  size_t inner_max;
  double eps_gap;
  double eps_primal;
  size_t max_iter;
  /**
   * Nonzero enables residual balancing of `rho`.
   */
  int32_t residual_balancing;
  int32_t stop_either;
} CcamaAdmmOptions;

typedef struct CcamaSignature {
  size_t pi;
  size_t nu;
  size_t delta;
} CcamaSignature;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or null. Valid until the
 * next call into this library from the same thread.
 */
const char *ccama_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ccama_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void ccama_string_free(char *s);

/**
 * Parses an instance from JSON text.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CcamaStatus ccama_instance_from_json(const char *json, struct CcamaInstance **out);

/**
 * Serializes an instance; release the result with [`ccama_string_free`].
 *
 * # Safety
 * `inst` must be a live handle and `out` a valid pointer.
 */
enum CcamaStatus ccama_instance_to_json(const struct CcamaInstance *inst, char **out);

/**
 * Builds the mass-spring-damper benchmark with `masses` masses.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CcamaStatus ccama_gen_msd(size_t masses, double gamma, struct CcamaInstance **out);

/**
 * State dimension, or 0 for a null handle.
 *
 * # Safety
 * `inst` must be null or a live handle.
 */
size_t ccama_instance_dim(const struct CcamaInstance *inst);

/**
 * Replaces the regularization weight.
 *
 * # Safety
 * `inst` must be a live handle.
 */
enum CcamaStatus ccama_instance_set_gamma(struct CcamaInstance *inst, double gamma);

/**
 * # Safety
 * `inst` must be null or a handle not yet freed.
 */
void ccama_instance_free(struct CcamaInstance *inst);

struct CcamaAmaOptions ccama_ama_options_default(void);

struct CcamaAdmmOptions ccama_admm_options_default(void);

/**
 * Runs AMA. `opts` may be null for defaults. On `Ok` or `NotConverged`
 * `*out` receives a solution handle.
 *
 * # Safety
 * `inst` must be a live handle, `opts` null or valid, `out` valid.
 */
enum CcamaStatus ccama_solve_ama(const struct CcamaInstance *inst,
                                 const struct CcamaAmaOptions *opts,
                                 struct CcamaSolution **out);

/**
 * Runs ADMM. Same conventions as [`ccama_solve_ama`].
 *
 * # Safety
 * `inst` must be a live handle, `opts` null or valid, `out` valid.
 */
enum CcamaStatus ccama_solve_admm(const struct CcamaInstance *inst,
                                  const struct CcamaAdmmOptions *opts,
                                  struct CcamaSolution **out);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t ccama_solution_dim(const struct CcamaSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
int32_t ccama_solution_converged(const struct CcamaSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
size_t ccama_solution_iterations(const struct CcamaSolution *sol);

/**
 * Final duality gap, NaN when the last dual point was infeasible.
 *
 * # Safety
 * `sol` must be null or a live handle.
 */
double ccama_solution_gap(const struct CcamaSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
double ccama_solution_primal_residual(const struct CcamaSolution *sol);

/**
 * # Safety
 * `sol` must be null or a live handle.
 */
double ccama_solution_dual_objective(const struct CcamaSolution *sol);

/**
 * Copies `X` (n×n, row-major).
 *
 * # Safety
 * `sol` must be a live handle and `out` must hold `len` doubles.
 */
enum CcamaStatus ccama_solution_x(const struct CcamaSolution *sol, double *out, size_t len);

/**
 * Copies `Z` (n×n, row-major).
 *
 * # Safety
 * `sol` must be a live handle and `out` must hold `len` doubles.
 */
enum CcamaStatus ccama_solution_z(const struct CcamaSolution *sol, double *out, size_t len);

/**
 * Copies the dual block `Y1` (n×n).
 *
 * # Safety
 * `sol` must be a live handle and `out` must hold `len` doubles.
 */
enum CcamaStatus ccama_solution_y1(const struct CcamaSolution *sol, double *out, size_t len);

/**
 * Copies the dual block `Y2` (p×p).
 *
 * # Safety
 * `sol` must be a live handle and `out` must hold `len` doubles.
 */
enum CcamaStatus ccama_solution_y2(const struct CcamaSolution *sol, double *out, size_t len);

/**
 * # Safety
 * `sol` must be null or a handle not yet freed.
 */
void ccama_solution_free(struct CcamaSolution *sol);

/**
 * Inertia of a symmetric n×n matrix with eigenvalues below
 * `zero_tol·‖Z‖₂` counted as zero.
 *
 * # Safety
 * `z` must hold n·n doubles and `out` must be valid.
 */
enum CcamaStatus ccama_signature(const double *z,
                                 size_t n,
                                 double zero_tol,
                                 struct CcamaSignature *out);

/**
 * Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A`; all buffers are n×n row-major.
 *
 * # Safety
 * `a` and `q` must hold n·n doubles and `x_out` must have room for n·n.
 */
enum CcamaStatus ccama_lyapunov_solve(const double *a, const double *q, size_t n, double *x_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CCAMA_H */
