#ifndef QCOMPAT_H
#define QCOMPAT_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QcDeviceKind {
  QC_DEVICE_KIND_METER = 0,
  QC_DEVICE_KIND_CLONER = 1,
  QC_DEVICE_KIND_INSTRUMENT = 2,
} QcDeviceKind;

typedef enum QcFeasibility {
  QC_FEASIBILITY_FEASIBLE = 0,
  QC_FEASIBILITY_INFEASIBLE_EVIDENCE = 1,
  QC_FEASIBILITY_UNDETERMINED = 2,
} QcFeasibility;

typedef enum QcPair {
  /**
   * Two noisy sharp meters.
   */
  QC_PAIR_METER_METER = 0,
  /**
   * Two depolarizing channels.
   */
  QC_PAIR_CHANNEL_CHANNEL = 1,
  /**
   * A noisy sharp meter and a depolarizing channel.
   */
  QC_PAIR_METER_CHANNEL = 2,
} QcPair;

typedef enum QcStatus {
  QC_STATUS_OK = 0,
  QC_STATUS_NULL_POINTER = 1,
  /**
   * A parameter is outside its admissible range, non-finite, or malformed.
   */
  QC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Sizes do not fit together.
   */
  QC_STATUS_DIMENSION = 3,
  /**
   * The construction does not exist in this dimension.
   */
  QC_STATUS_UNSUPPORTED = 4,
  /**
   * Input matrices do not describe a valid device.
   */
  QC_STATUS_INVALID_DEVICE = 5,
  QC_STATUS_BUFFER_TOO_SMALL = 6,
  QC_STATUS_PANIC = 7,
} QcStatus;

/**
 * Opaque channel.
 */
typedef struct QcChannel QcChannel;

/**
 * Opaque joint device built from the named vocabulary.
 */
typedef struct QcDevice QcDevice;

/**
 * Summary of a device verification.
 */
typedef struct QcReport {
  /**
   * Largest margin, normalization or trace-preservation residual.
   */
  double max_residual;
  /**
   * Smallest eigenvalue over effects, Choi operators or branches.
   */
  double psd_margin;
  bool passed;
} QcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the message of the last failed call on this thread into `buf`,
 * truncating to `len - 1` bytes plus a terminating NUL. Returns the full
 * message length without the NUL; `buf` may be null to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qc_last_error_message(char *buf, size_t len);

/**
 * Closed-form membership of `(s, t)` in the compatibility region.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QcStatus qc_in_region(enum QcPair pair,
                           size_t d,
                           double s,
                           double t,
                           bool extended,
                           bool *out);

/**
 * Admissible `s`-interval of the extended region at fixed `t`.
 *
 * # Safety
 * `lo` and `hi` must be valid pointers.
 */
enum QcStatus qc_s_interval(enum QcPair pair, size_t d, double t, double *lo, double *hi);

/**
 * Writes `n` boundary points into `s_out` and `t_out`.
 *
 * # Safety
 * `s_out` and `t_out` must each point to `n` writable doubles.
 */
enum QcStatus qc_sample_boundary(enum QcPair pair,
                                 size_t d,
                                 bool extended,
                                 size_t n,
                                 double *s_out,
                                 double *t_out);

/**
 * Noise coefficients `a_k(r)` and `b(r)` with effective dimension `d^k`, `k ∈ {1, 2}`.
 *
 * # Safety
 * `a` and `b` must be valid pointers.
 */
enum QcStatus qc_noise_coeffs(uint32_t k, size_t d, double r, double *a, double *b);

/**
 * Builds a named joint device such as `"g-opt"` or `"gamma-corner"`.
 * `has_param` selects whether `param` is used; parametric devices fall back
 * to 0.5 without it.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QcStatus qc_device_new(const char *name,
                            size_t d,
                            bool has_param,
                            double param,
                            struct QcDevice **out);

/**
 * Releases a device; null is ignored.
 *
 * # Safety
 * `device` must be null or come from [`qc_device_new`] and not be freed yet.
 */
void qc_device_free(struct QcDevice *device);

/**
 * Kind, dimension and number of stored matrices of a device. Any output may be null.
 *
 * # Safety
 * `device` must be a live handle; non-null outputs must be valid pointers.
 */
enum QcStatus qc_device_info(const struct QcDevice *device,
                             enum QcDeviceKind *kind,
                             size_t *dim,
                             size_t *matrices);

/**
 * Copies matrix `index` of a device: effects of a meter (row-major outcome
 * order), the normalized Choi operator of a cloner, or the Choi blocks of an
 * instrument. `size` receives the side length; the arrays need `size²` entries.
 * Pass null arrays to query `size` only.
 *
 * # Safety
 * `device` must be a live handle; `re`/`im` must be null or hold `capacity` doubles.
 */
enum QcStatus qc_device_matrix(const struct QcDevice *device,
                               size_t index,
                               double *re,
                               double *im,
                               size_t capacity,
                               size_t *size);

/**
 * Verifies a device against its expected margins at tolerance 1e-10.
 *
 * # Safety
 * `device` must be a live handle and `out` a valid pointer.
 */
enum QcStatus qc_device_check(const struct QcDevice *device, struct QcReport *out);

/**
 * The depolarizing channel `I_r` on `C^d`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QcStatus qc_channel_depolarizing(size_t d, double r, struct QcChannel **out);

/**
 * A channel from its normalized Choi operator (trace one, input factor
 * first), given as row-major arrays of `(in_dim·out_dim)²` entries.
 *
 * # Safety
 * `re` and `im` must point to `(in_dim·out_dim)²` doubles; `out` must be valid.
 */
enum QcStatus qc_channel_from_choi(size_t in_dim,
                                   size_t out_dim,
                                   const double *re,
                                   const double *im,
                                   struct QcChannel **out);

/**
 * Releases a channel; null is ignored.
 *
 * # Safety
 * `channel` must be null or a handle from this library not freed yet.
 */
void qc_channel_free(struct QcChannel *channel);

/**
 * Tests whether a channel is depolarizing; on success `r` receives its parameter.
 *
 * # Safety
 * `channel` must be a live handle; `found` and `r` must be valid pointers.
 */
enum QcStatus qc_detect_depolarizing(const struct QcChannel *channel,
                                     double tol,
                                     bool *found,
                                     double *r);

/**
 * Runs the self-check suites for the given dimensions and reports the number
 * of passed and failed checks.
 *
 * # Safety
 * `dims` must point to `n_dims` values; `passed` and `failed` must be valid.
 */
enum QcStatus qc_verify(const size_t *dims, size_t n_dims, size_t *passed, size_t *failed);

/**
 * One run of the numerical oracle at `(s, t)`.
 *
 * # Safety
 * `status`, `iterations` and `residual` must be valid pointers.
 */
enum QcStatus qc_feasibility_check(enum QcPair pair,
                                   size_t d,
                                   double s,
                                   double t,
                                   size_t budget,
                                   enum QcFeasibility *status,
                                   size_t *iterations,
                                   double *residual);

/**
 * Oracle estimate of the largest (`maximize`) or smallest compatible `s` at `t`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum QcStatus qc_oracle_boundary(enum QcPair pair,
                                 size_t d,
                                 double t,
                                 bool maximize,
                                 size_t budget,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCOMPAT_H */
