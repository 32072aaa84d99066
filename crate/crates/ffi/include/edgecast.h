#ifndef EDGECAST_H
#define EDGECAST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcStatus {
  EC_STATUS_OK = 0,
  EC_STATUS_NULL_POINTER = 1,
  EC_STATUS_INVALID_ARGUMENT = 2,
  EC_STATUS_INFEASIBLE = 3,
  EC_STATUS_NUMERICAL = 4,
  EC_STATUS_IO = 5,
  EC_STATUS_PANIC = 6,
} EcStatus;

typedef enum EcFading {
  EC_FADING_RAYLEIGH = 0,
  EC_FADING_DETERMINISTIC = 1,
} EcFading;

typedef enum EcScheme {
  EC_SCHEME_DOUBLE_BISECTION = 0,
  EC_SCHEME_IDENTICAL_BANDWIDTH = 1,
} EcScheme;

/**
 * Opaque allocation result.
 */
typedef struct EcAllocation EcAllocation;

/**
 * Opaque interest model.
 */
typedef struct EcModel EcModel;

/**
 * Opaque allocation problem under construction.
 */
typedef struct EcProblem EcProblem;

/**
 * One downlink: bandwidth, transmit power, distance and the shared radio
 * parameters.
 */
typedef struct EcLink {
  double bandwidth_hz;
  double power_w;
  double distance_m;
  /**
   * Noise power spectral density, W/Hz.
   */
  double noise_psd;
  double block_s;
  double reference_loss_db;
  double path_loss_exponent;
  enum EcFading fading;
} EcLink;

typedef struct EcConstraint {
  double target_s;
  double violation_prob;
  double cloud_delay_s;
  /**
   * Nonzero when the requested video is in the edge cache.
   */
  uint8_t cached;
} EcConstraint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next call into this library from the same thread.
 */
const char *ec_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ec_version(void);

/**
 * `E[exp(-theta R T)]` of the link's per-block capacity.
 *
 * # Safety
 * `link` and `out` must be valid pointers.
 */
enum EcStatus ec_neg_moment(const struct EcLink *link, double theta, double *out);

/**
 * Mean capacity `E[R]` in bit/s.
 *
 * # Safety
 * `link` and `out` must be valid pointers.
 */
enum EcStatus ec_mean_capacity(const struct EcLink *link, double *out);

/**
 * Effective capacity `-ln E[exp(-theta R T)] / (theta T)` in bit/s.
 *
 * # Safety
 * `link` and `out` must be valid pointers.
 */
enum EcStatus ec_max_coding_rate(const struct EcLink *link, double theta, double *out);

/**
 * Largest coding rate whose delay bound meets the constraint.
 *
 * # Safety
 * `link`, `constraint` and `out` must be valid pointers.
 */
enum EcStatus ec_calibrated_rate(const struct EcLink *link,
                                 const struct EcConstraint *constraint,
                                 double *out);

/**
 * Upper bound on the delay violation probability at coding rate `rate`.
 *
 * # Safety
 * `link`, `constraint` and `out` must be valid pointers.
 */
enum EcStatus ec_dvp_bound(const struct EcLink *link,
                           const struct EcConstraint *constraint,
                           double rate,
                           double *out);

/**
 * Simulates the link's queue at `rate` and reports the fraction of arrival
 * blocks delayed more than `budget_blocks`, with its standard error.
 *
 * # Safety
 * `link`, `probability` and `std_error` must be valid pointers.
 */
enum EcStatus ec_simulate_queue(const struct EcLink *link,
                                double rate,
                                size_t blocks,
                                size_t warmup,
                                uint64_t seed,
                                uint32_t budget_blocks,
                                double *probability,
                                double *std_error);

/**
 * Starts an empty allocation problem.
 *
 * # Safety
 * `out` must be a valid pointer; the handle it receives must be released
 * with [`ec_problem_free`].
 */
enum EcStatus ec_problem_new(double total_bandwidth_hz,
                             double noise_psd,
                             double block_s,
                             double reference_loss_db,
                             double path_loss_exponent,
                             enum EcFading fading,
                             double rate_tol,
                             double band_tol,
                             struct EcProblem **out);

/**
 * Appends a user to the problem.
 *
 * # Safety
 * `problem` must come from [`ec_problem_new`]; `constraint` must be valid.
 */
enum EcStatus ec_problem_add_user(struct EcProblem *problem,
                                  double distance_m,
                                  double power_w,
                                  const struct EcConstraint *constraint);

/**
 * # Safety
 * `problem` must come from [`ec_problem_new`] or be NULL.
 */
void ec_problem_free(struct EcProblem *problem);

/**
 * Solves the problem with the chosen scheme.
 *
 * # Safety
 * `problem` must come from [`ec_problem_new`]; `out` must be valid. The
 * result must be released with [`ec_allocation_free`].
 */
enum EcStatus ec_allocate(const struct EcProblem *problem,
                          enum EcScheme scheme,
                          struct EcAllocation **out);

/**
 * Common coding rate of the allocation.
 *
 * # Safety
 * `alloc` must come from [`ec_allocate`]; `out` must be valid.
 */
enum EcStatus ec_allocation_rate(const struct EcAllocation *alloc, double *out);

/**
 * Number of users in the allocation.
 *
 * # Safety
 * `alloc` must come from [`ec_allocate`]; `out` must be valid.
 */
enum EcStatus ec_allocation_len(const struct EcAllocation *alloc, size_t *out);

/**
 * Copies per-user bandwidths and sustained rates into caller buffers of
 * length `len`, which must equal [`ec_allocation_len`]. Either buffer may
 * be NULL to skip it.
 *
 * # Safety
 * Non-NULL buffers must hold `len` doubles.
 */
enum EcStatus ec_allocation_copy(const struct EcAllocation *alloc,
                                 double *bandwidths,
                                 double *sustained_rates,
                                 size_t len);

/**
 * # Safety
 * `alloc` must come from [`ec_allocate`] or be NULL.
 */
void ec_allocation_free(struct EcAllocation *alloc);

/**
 * Group interest score of each video from a row-major `users x videos`
 * prediction matrix and per-user similarity weights.
 *
 * # Safety
 * `predictions` holds `users * videos` doubles, `similarity_weights` holds
 * `users`, `out_scores` holds `videos`.
 */
enum EcStatus ec_group_interest(const double *predictions,
                                size_t users,
                                size_t videos,
                                const double *similarity_weights,
                                double delta,
                                double *out_scores);

/**
 * Marks the `capacity` best-scored videos (ties to the lower id) with 1 in
 * `out_cached`, others with 0.
 *
 * # Safety
 * `videos`, `scores` and `out_cached` each hold `len` elements.
 */
enum EcStatus ec_decide_cache(const uint32_t *videos,
                              const double *scores,
                              size_t len,
                              size_t capacity,
                              uint8_t *out_cached);

/**
 * Loads a weights file written by `edgecast train`.
 *
 * # Safety
 * `path` is a NUL-terminated UTF-8 path; `out` must be valid. The handle
 * must be released with [`ec_model_free`].
 */
enum EcStatus ec_model_load(const char *path, struct EcModel **out);

/**
 * Input dimension of the model.
 *
 * # Safety
 * `model` must come from [`ec_model_load`]; `out` must be valid.
 */
enum EcStatus ec_model_dim(const struct EcModel *model, size_t *out);

/**
 * Predicted interest for one dense, already encoded feature vector.
 *
 * # Safety
 * `x` holds `len` doubles; `model` and `out` must be valid.
 */
enum EcStatus ec_model_predict(const struct EcModel *model,
                               const double *x,
                               size_t len,
                               double *out);

/**
 * # Safety
 * `model` must come from [`ec_model_load`] or be NULL.
 */
void ec_model_free(struct EcModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EDGECAST_H */
