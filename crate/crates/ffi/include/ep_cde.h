#ifndef EP_CDE_H
#define EP_CDE_H

/* Generated by cbindgen from the ep-cde-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Outcome of a call.
 */
typedef enum EpCdeStatus {
  EP_CDE_STATUS_OK = 0,
  EP_CDE_STATUS_NULL_POINTER = 1,
  EP_CDE_STATUS_INVALID_ARGUMENT = 2,
  EP_CDE_STATUS_PRECONDITION = 3,
  EP_CDE_STATUS_NUMERICAL = 4,
  EP_CDE_STATUS_PANIC = 5,
} EpCdeStatus;

typedef enum EpCdeLoss {
  EP_CDE_LOSS_SQUARE = 0,
  EP_CDE_LOSS_LINE = 1,
} EpCdeLoss;

typedef enum EpCdeDesign {
  EP_CDE_DESIGN_FIXED = 0,
  EP_CDE_DESIGN_RANDOM = 1,
} EpCdeDesign;

/**
 * A fitted conditional density estimate.
 */
typedef struct EpCdeFit EpCdeFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fits the estimator to `n` pairs and stores a new handle in `*out`.
 * `design` takes an [`EpCdeDesign`] value and `loss` an [`EpCdeLoss`] value.
 *
 * # Safety
 * `y` and `x` must point to `n` readable values; `out` must be writable.
 */
enum EpCdeStatus ep_cde_fit_new(const double *y,
                                const double *x,
                                size_t n,
                                int32_t design,
                                int32_t loss,
                                struct EpCdeFit **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `fit` must be null or a handle from [`ep_cde_fit_new`] not yet freed.
 */
void ep_cde_fit_free(struct EpCdeFit *fit);

/**
 * Evaluates the estimate at one point.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum EpCdeStatus ep_cde_fit_evaluate(const struct EpCdeFit *fit, double y, double x, double *out);

/**
 * Evaluates on the tensor grid `ys x xs`, writing `ny * nx` values
 * response-major (`out[i * nx + j]` is at `(ys[i], xs[j])`).
 *
 * # Safety
 * `ys`, `xs` must hold `ny`, `nx` values and `out` room for `ny * nx`.
 */
enum EpCdeStatus ep_cde_fit_evaluate_grid(const struct EpCdeFit *fit,
                                          const double *ys,
                                          size_t ny,
                                          const double *xs,
                                          size_t nx,
                                          double *out);

/**
 * The plug-in coefficient of difficulty used by the fit.
 *
 * # Safety
 * `fit` must be a live handle and `out` writable.
 */
enum EpCdeStatus ep_cde_fit_difficulty(const struct EpCdeFit *fit, double *out);

/**
 * Univariate and bivariate block cutoffs `K` and `T`.
 *
 * # Safety
 * `fit` must be a live handle; `k` and `t` writable.
 */
enum EpCdeStatus ep_cde_fit_cutoffs(const struct EpCdeFit *fit, size_t *k, size_t *t);

/**
 * Univariate Pinsker constant of order `m`.
 *
 * # Safety
 * `out` must be writable.
 */
enum EpCdeStatus ep_cde_pinsker_uni(uint32_t m, double *out);

/**
 * Anisotropic Pinsker constant for smoothness `(alpha, beta)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum EpCdeStatus ep_cde_pinsker_aniso(double alpha, double beta, double *out);

/**
 * Closed-form and series minimax risk of the Sobolev class `(m_y, m_x)`
 * with radius `q` at difficulty `d` and sample size `n`.
 *
 * # Safety
 * `closed` and `series` must be writable.
 */
enum EpCdeStatus ep_cde_sobolev_risk(uint32_t m_y,
                                     uint32_t m_x,
                                     double q,
                                     double d,
                                     size_t n,
                                     double *closed,
                                     double *series);

/**
 * Copies the calling thread's last error message into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length including the NUL,
 * or 0 when the last call succeeded.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t ep_cde_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ep_cde_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EP_CDE_H */
