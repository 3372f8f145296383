/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef PROXYSTREAM_H
#define PROXYSTREAM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every exported function.
 */
typedef enum PsStatus {
  PS_STATUS_OK = 0,
  PS_STATUS_NULL_POINTER = 1,
  PS_STATUS_INVALID_UTF8 = 2,
  PS_STATUS_INVALID_ARGUMENT = 3,
  PS_STATUS_CONFIG = 4,
  PS_STATUS_IO = 5,
  PS_STATUS_PARSE = 6,
  PS_STATUS_SCHEMA = 7,
  PS_STATUS_CONTRACT = 8,
  PS_STATUS_DIMENSION_MISMATCH = 9,
  PS_STATUS_COLD_START = 10,
  PS_STATUS_OUT_OF_RANGE = 11,
  PS_STATUS_PANIC = 12,
} PsStatus;

typedef enum PsMetric {
  PS_METRIC_CLUSTER_RMSE = 0,
  PS_METRIC_ENTITY_RMSE = 1,
  PS_METRIC_TOP_DECILE_F1 = 2,
  PS_METRIC_TURNOVER_APE = 3,
} PsMetric;

/**
 * Opaque result of one streaming run.
 */
typedef struct PsRun PsRun;

/**
 * Opaque event store.
 */
typedef struct PsStore PsStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ps_last_error(void);

/**
 * Cluster count for `n` entities; `rho == 0` means one cluster.
 */
enum PsStatus ps_cluster_count(size_t n, size_t rho, size_t *count);

/**
 * Least-squares line through `values[j]` at `j = 0..len`, with the RMS residual.
 */
enum PsStatus ps_linear_fit(const double *values,
                            size_t len,
                            double *slope,
                            double *intercept,
                            double *residual);

/**
 * Average distance between sample mean and medoid of `n` uniform points in `[0,1]^d`.
 */
enum PsStatus ps_mean_medoid_gap(size_t n, size_t d, size_t samples, uint64_t seed, double *gap);

/**
 * Generate a synthetic store from a TOML spec.
 */
enum PsStatus ps_store_generate(const char *spec_toml, struct PsStore **store);

/**
 * Read an event CSV. A null `schema_toml` selects the 2019 purchase-order export layout.
 */
enum PsStatus ps_store_read_csv(const char *path, const char *schema_toml, struct PsStore **store);

/**
 * Keep the invoice cases that pass the milestone and date rules.
 */
enum PsStatus ps_store_filter_invoices(const struct PsStore *store, struct PsStore **filtered);

enum PsStatus ps_store_counts(const struct PsStore *store,
                              size_t *entities,
                              size_t *events,
                              size_t *labels);

void ps_store_free(struct PsStore *store);

/**
 * Run the streaming pipeline over `store` with a TOML pipeline config.
 */
enum PsStatus ps_run(const struct PsStore *store, const char *config_toml, struct PsRun **run);

enum PsStatus ps_run_step_count(const struct PsRun *run, size_t *steps);

/**
 * Metric of step `index`; `defined` is 0 when nothing resolved at that step.
 */
enum PsStatus ps_run_step_metric(const struct PsRun *run,
                                 size_t index,
                                 enum PsMetric metric,
                                 int64_t *step,
                                 double *value,
                                 bool *defined);

/**
 * Mean of a metric over the steps where it is defined.
 */
enum PsStatus ps_run_metric_mean(const struct PsRun *run,
                                 enum PsMetric metric,
                                 double *value,
                                 bool *defined);

void ps_run_free(struct PsRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PROXYSTREAM_H */
