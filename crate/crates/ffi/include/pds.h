#ifndef PDS_H
#define PDS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdsStatus {
  PDS_STATUS_OK = 0,
  PDS_STATUS_NULL_POINTER = 1,
  PDS_STATUS_INVALID_ARGUMENT = 2,
  PDS_STATUS_SHAPE_MISMATCH = 3,
  PDS_STATUS_NOT_INVERTIBLE = 4,
  PDS_STATUS_IO = 5,
  PDS_STATUS_FORMAT = 6,
  PDS_STATUS_DIVERGED = 7,
  PDS_STATUS_NON_FINITE_SCORE = 8,
  PDS_STATUS_UNSUPPORTED = 9,
  PDS_STATUS_PANIC = 10,
} PdsStatus;

typedef enum PdsOperator {
  PDS_OPERATOR_M = 0,
  PDS_OPERATOR_M_INVERSE = 1,
  PDS_OPERATOR_DRIFT = 2,
} PdsOperator;

/**
 * Real C×H×W grid.
 */
typedef struct PdsField PdsField;

/**
 * Space and frequency filter pair.
 */
typedef struct PdsPreconditioner PdsPreconditioner;

/**
 * Analytic target distribution.
 */
typedef struct PdsTarget PdsTarget;

/**
 * Sampler settings; `preconditioner` may be null for vanilla Langevin.
 * `skew` is 0 for none, 1–6 for the shift operators, 7 for the spectral
 * transpose difference.
 */
typedef struct PdsSamplerOptions {
  size_t iterations;
  double epsilon;
  uint64_t seed;
  uint32_t skew;
  double omega;
  bool denoise_final;
} PdsSamplerOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. Valid until
 * the next failing call on the same thread.
 */
const char *pds_last_error(void);

/**
 * New field; `data` (row-major, `channels*height*width` values) may be null
 * for zeros.
 *
 * # Safety
 * `data`, if non-null, must point to that many readable doubles.
 */
enum PdsStatus pds_field_new(size_t channels,
                             size_t height,
                             size_t width,
                             const double *data,
                             struct PdsField **out);

/**
 * # Safety
 * `field` must come from this library and not be freed twice.
 */
void pds_field_free(struct PdsField *field);

/**
 * # Safety
 * Non-null pointers must be valid.
 */
enum PdsStatus pds_field_shape(const struct PdsField *field,
                               size_t *channels,
                               size_t *height,
                               size_t *width);

/**
 * Copies the values into `out`, which holds `len` doubles; `len` must equal
 * the field length.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum PdsStatus pds_field_read(const struct PdsField *field, double *out, size_t len);

/**
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum PdsStatus pds_field_load(const char *path, struct PdsField **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum PdsStatus pds_field_save(const struct PdsField *field, const char *path);

/**
 * Two-level frequency filter in centered order.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdsStatus pds_filter_parametric(size_t channels,
                                     size_t height,
                                     size_t width,
                                     double radius,
                                     double lambda,
                                     struct PdsField **out);

/**
 * Frequency filter from sample statistics.
 *
 * # Safety
 * `samples` must point to `count` valid field handles.
 */
enum PdsStatus pds_filter_statistical(const struct PdsField *const *samples,
                                      size_t count,
                                      double alpha,
                                      struct PdsField **out);

/**
 * Space filter from nonnegative samples.
 *
 * # Safety
 * `samples` must point to `count` valid field handles.
 */
enum PdsStatus pds_filter_space(const struct PdsField *const *samples,
                                size_t count,
                                struct PdsField **out);

/**
 * # Safety
 * `a` and `r` must be valid field handles.
 */
enum PdsStatus pds_preconditioner_new(const struct PdsField *a,
                                      const struct PdsField *r,
                                      struct PdsPreconditioner **out);

/**
 * # Safety
 * `p` must come from this library and not be freed twice.
 */
void pds_preconditioner_free(struct PdsPreconditioner *p);

/**
 * `M x`, `M⁻¹ x` or `M⁻¹M⁻ᵀ x` into a new field.
 *
 * # Safety
 * Handles must be valid.
 */
enum PdsStatus pds_preconditioner_apply(const struct PdsPreconditioner *p,
                                        enum PdsOperator op,
                                        const struct PdsField *x,
                                        struct PdsField **out);

/**
 * `N(mean, cov)`; `cov` is row-major `n×n` with `n` the mean's length.
 *
 * # Safety
 * `cov` must point to `n*n` doubles.
 */
enum PdsStatus pds_target_gaussian(const struct PdsField *mean,
                                   const double *cov,
                                   struct PdsTarget **out);

/**
 * Power-law Gaussian random field.
 *
 * # Safety
 * `out` must be writable.
 */
enum PdsStatus pds_target_grf(size_t channels,
                              size_t height,
                              size_t width,
                              double condition,
                              double decay,
                              struct PdsTarget **out);

/**
 * `½ N(offset, σ² I) + ½ N(−offset, σ² I)`.
 *
 * # Safety
 * `offset` must be a valid handle.
 */
enum PdsStatus pds_target_mixture_pair(const struct PdsField *offset,
                                       double variance,
                                       struct PdsTarget **out);

/**
 * # Safety
 * `t` must come from this library and not be freed twice.
 */
void pds_target_free(struct PdsTarget *t);

/**
 * # Safety
 * Handles must be valid.
 */
enum PdsStatus pds_target_score(const struct PdsTarget *t,
                                const struct PdsField *x,
                                struct PdsField **out);

/**
 * Log density up to an additive constant.
 *
 * # Safety
 * Handles must be valid and `out` writable.
 */
enum PdsStatus pds_target_log_density(const struct PdsTarget *t,
                                      const struct PdsField *x,
                                      double *out);

/**
 * Runs chain 0 and returns its final state; `x0` may be null for a standard
 * normal start.
 *
 * # Safety
 * Non-null handles must be valid.
 */
enum PdsStatus pds_sample(const struct PdsTarget *t,
                          const struct PdsPreconditioner *preconditioner,
                          struct PdsSamplerOptions options,
                          const struct PdsField *x0,
                          struct PdsField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDS_H */
