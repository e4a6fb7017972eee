#ifndef EXTREME_GIBBS_H
#define EXTREME_GIBBS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes.
 */
typedef enum EgStatus {
  EG_STATUS_OK = 0,
  EG_STATUS_NULL_POINTER = 1,
  EG_STATUS_INVALID_ARGUMENT = 2,
  EG_STATUS_DOMAIN = 3,
  EG_STATUS_NUMERIC = 4,
  EG_STATUS_RANGE = 5,
  EG_STATUS_RESOURCE = 6,
  EG_STATUS_MODEL = 7,
  EG_STATUS_IO = 8,
  EG_STATUS_PANIC = 9,
} EgStatus;

/**
 * Exceedance mixture at fixed `(n, a)`.
 */
typedef struct EgExceedance EgExceedance;

/**
 * Fast-growth density at fixed `(n, a)`.
 */
typedef struct EgFastGrowth EgFastGrowth;

/**
 * A density model.
 */
typedef struct EgModel EgModel;

/**
 * Exact conditional law of `X_1` given `S_n = n a` (and given `S_n ≥ n a`).
 */
typedef struct EgOracle EgOracle;

/**
 * Tilt parameters and tilted moments.
 */
typedef struct EgTilt {
  double t;
  /**
   * Tilted mean.
   */
  double m;
  double s2;
  double mu3;
  double log_phi;
} EgTilt;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *eg_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be NULL or valid for `len` bytes.
 */
size_t eg_last_error_message(char *buf, size_t len);

/**
 * Builds a model from a short name (`weibull:2`, `exp_exponential`,
 * `half_gaussian`) or a path to a model spec file.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum EgStatus eg_model_new(const char *spec, struct EgModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from [`eg_model_new`], not yet freed.
 */
void eg_model_free(struct EgModel *model);

/**
 * `ln p(x)`; `-inf` outside the support.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_model_log_density(const struct EgModel *model, double x, double *out);

/**
 * Moments of the tilt at parameter `t`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_tilt_moments(const struct EgModel *model, double t, struct EgTilt *out);

/**
 * Solves `m(t) = a`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_tilt_solve(const struct EgModel *model, double a, struct EgTilt *out);

/**
 * Tilted density at level `a`, evaluated at `y`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_tilted_approx(const struct EgModel *model,
                               size_t n,
                               double a,
                               double y,
                               double *out);

/**
 * `ln P(S_n ≥ n a)` from the tail formula.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_log_tail_probability(const struct EgModel *model, size_t n, double a, double *out);

/**
 * # Safety
 * `model` must be valid; `out` must be valid for writes.
 */
enum EgStatus eg_fast_growth_new(const struct EgModel *model,
                                 size_t n,
                                 double a,
                                 struct EgFastGrowth **out);

/**
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_fast_growth_density(const struct EgFastGrowth *h, double y, double *out);

/**
 * # Safety
 * `h` must be NULL or a live handle.
 */
void eg_fast_growth_free(struct EgFastGrowth *h);

/**
 * Exceedance mixture with default options.
 *
 * # Safety
 * `model` must be valid; `out` must be valid for writes.
 */
enum EgStatus eg_exceedance_new(const struct EgModel *model,
                                size_t n,
                                double a,
                                struct EgExceedance **out);

/**
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_exceedance_density(const struct EgExceedance *h, double y, double *out);

/**
 * # Safety
 * `h` must be NULL or a live handle.
 */
void eg_exceedance_free(struct EgExceedance *h);

/**
 * Builds the convolution oracle at `(n, a)` with default grid options.
 *
 * # Safety
 * `model` must be valid; `out` must be valid for writes.
 */
enum EgStatus eg_oracle_new(const struct EgModel *model, size_t n, double a, struct EgOracle **out);

/**
 * Exact density of `X_1` given `S_n = n a`, at `y`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_oracle_conditional(const struct EgOracle *h, double y, double *out);

/**
 * Exact density of `X_1` given `S_n ≥ n a`, at `y`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_oracle_exceedance(const struct EgOracle *h, double y, double *out);

/**
 * Exact `ln P(S_n ≥ n a)`.
 *
 * # Safety
 * Handle and out pointer must be valid.
 */
enum EgStatus eg_oracle_log_tail(const struct EgOracle *h, double *out);

/**
 * # Safety
 * `h` must be NULL or a live handle.
 */
void eg_oracle_free(struct EgOracle *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EXTREME_GIBBS_H */
