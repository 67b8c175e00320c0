#ifndef CAUCHY_PCA_H
#define CAUCHY_PCA_H

#pragma once

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpcaCentering {
  CPCA_CENTERING_COLUMN_MEDIAN = 0,
  CPCA_CENTERING_SPATIAL_MEDIAN = 1,
  CPCA_CENTERING_NONE = 2,
} CpcaCentering;

typedef enum CpcaScale {
  CPCA_SCALE_MEDIAN_ABS_DEVIATION = 0,
  CPCA_SCALE_MEAN_ABS_ABOUT_MEDIAN = 1,
  CPCA_SCALE_MEAN_ABS_ABOUT_MEAN = 2,
  CPCA_SCALE_NONE = 3,
} CpcaScale;

typedef enum CpcaStatus {
  CPCA_STATUS_OK = 0,
  CPCA_STATUS_INVALID_INPUT = 1,
  CPCA_STATUS_FAILED_CONVERGENCE = 2,
  CPCA_STATUS_ZERO_VARIANCE = 3,
  CPCA_STATUS_MULTIPLICITY = 4,
  CPCA_STATUS_DEGENERATE_SAMPLE = 5,
  CPCA_STATUS_ZERO_UPDATE = 6,
  CPCA_STATUS_UNSUPPORTED_DIMENSION = 7,
  CPCA_STATUS_SINGULAR_A = 8,
  CPCA_STATUS_SINGULAR_FISHER = 9,
  CPCA_STATUS_ZERO_SCALE = 10,
  CPCA_STATUS_TOO_MANY_FAILURES = 11,
  CPCA_STATUS_NULL_POINTER = 100,
  CPCA_STATUS_PANIC = 101,
} CpcaStatus;

/**
 * An n x p data matrix.
 */
typedef struct CpcaData CpcaData;

/**
 * Result of a Cauchy PCA fit.
 */
typedef struct CpcaFit CpcaFit;

typedef struct CpcaFitOptions {
  size_t components;
  enum CpcaCentering centering;
  enum CpcaScale scale;
  double outer_tol_deg;
  size_t max_outer_iters;
} CpcaFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failing call on this thread, or null if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *cpca_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cpca_version(void);

struct CpcaFitOptions cpca_fit_options_default(void);

/**
 * Copies `nrows * ncols` row-major values into a new data handle.
 *
 * # Safety
 * `values` must point to `nrows * ncols` readable doubles and `out` must be
 * a valid pointer.
 */
enum CpcaStatus cpca_data_new(const double *values,
                              size_t nrows,
                              size_t ncols,
                              struct CpcaData **out);

/**
 * # Safety
 * `data` must be null or a handle from [`cpca_data_new`] not yet freed.
 */
void cpca_data_free(struct CpcaData *data);

/**
 * # Safety
 * `data` must be a live handle.
 */
size_t cpca_data_nrows(const struct CpcaData *data);

/**
 * # Safety
 * `data` must be a live handle.
 */
size_t cpca_data_ncols(const struct CpcaData *data);

/**
 * Preprocesses `data` and fits `options.components` Cauchy directions.
 *
 * # Safety
 * `data` must be a live handle, `options` null (defaults) or valid, `out`
 * valid.
 */
enum CpcaStatus cpca_fit(const struct CpcaData *data,
                         const struct CpcaFitOptions *options,
                         struct CpcaFit **out);

/**
 * # Safety
 * `fit` must be null or a handle from [`cpca_fit`] not yet freed.
 */
void cpca_fit_free(struct CpcaFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t cpca_fit_components(const struct CpcaFit *fit);

/**
 * # Safety
 * `fit` must be a live handle.
 */
size_t cpca_fit_dim(const struct CpcaFit *fit);

/**
 * Copies direction `index` into `out`, which must hold `len >= p` doubles.
 *
 * # Safety
 * `fit` must be a live handle and `out` must point to `len` writable doubles.
 */
enum CpcaStatus cpca_fit_direction(const struct CpcaFit *fit,
                                   size_t index,
                                   double *out,
                                   size_t len);

/**
 * Location and scale of the projections onto direction `index`, and
 * whether its iteration converged.
 *
 * # Safety
 * `fit` must be a live handle; output pointers may be null.
 */
enum CpcaStatus cpca_fit_params(const struct CpcaFit *fit,
                                size_t index,
                                double *mu,
                                double *sigma,
                                bool *converged);

/**
 * Sign-invariant angle in degrees between two length-`p` vectors.
 *
 * # Safety
 * `a` and `b` must point to `p` doubles, `out` must be valid.
 */
enum CpcaStatus cpca_angle_degrees(const double *a, const double *b, size_t p, double *out);

/**
 * Influence of a point `z` on the leading direction estimated from `data`
 * as given (no preprocessing). `cauchy` selects the Cauchy estimator,
 * otherwise classical PCA. Writes `p` values to `out`. For the Cauchy
 * estimator a near-singular `A` leaves `out` untouched, sets `*singular`
 * and returns `CPCA_STATUS_SINGULAR_A`.
 *
 * # Safety
 * `data` must be a live handle, `z` must point to `p` doubles, `out` to
 * `len` writable doubles; `singular` may be null.
 */
enum CpcaStatus cpca_influence(const struct CpcaData *data,
                               const double *z,
                               bool cauchy,
                               double *out,
                               size_t len,
                               bool *singular);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAUCHY_PCA_H */
