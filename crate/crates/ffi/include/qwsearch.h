#ifndef QWSEARCH_H
#define QWSEARCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QwsStatus {
  QWS_STATUS_OK = 0,
  QWS_STATUS_NULL_POINTER = 1,
  QWS_STATUS_INVALID_ARGUMENT = 2,
  QWS_STATUS_PARSE = 3,
  QWS_STATUS_COMPUTATION = 4,
  QWS_STATUS_PANIC = 5,
} QwsStatus;

/**
 * A validated instance file.
 */
typedef struct QwsInstance QwsInstance;

/**
 * An experiment report.
 */
typedef struct QwsReport QwsReport;

typedef struct QwsStopping {
  /**
   * E_σ(τ_M); +inf when M is unreachable.
   */
  double hitting_time;
  double return_probability;
  double expected_return;
  double commute_time;
} QwsStopping;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into this library on the same thread.
 */
const char *qws_last_error(void);

/**
 * Parses an instance from a NUL-terminated JSON string.
 *
 * # Safety
 * `json` must be a valid C string; `out` must be writable.
 */
enum QwsStatus qws_instance_from_json(const char *json, bool lenient, struct QwsInstance **out);

/**
 * Loads an instance file.
 *
 * # Safety
 * `path` must be a valid C string; `out` must be writable.
 */
enum QwsStatus qws_instance_load(const char *path, bool lenient, struct QwsInstance **out);

/**
 * # Safety
 * `inst` must come from this library and not be freed twice. NULL is a no-op.
 */
void qws_instance_free(struct QwsInstance *inst);

/**
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum QwsStatus qws_instance_vertex_count(const struct QwsInstance *inst, size_t *out);

/**
 * Effective resistance R_{σ,M} and C_{σ,M} = W·R_{σ,M}.
 *
 * # Safety
 * `inst` must be a live handle; `r` and `c` must be writable.
 */
enum QwsStatus qws_resistance(const struct QwsInstance *inst, double *r, double *c);

/**
 * Exact stopping statistics with S = supp σ.
 *
 * # Safety
 * `inst` must be a live handle; `out` must be writable.
 */
enum QwsStatus qws_stopping_stats(const struct QwsInstance *inst, struct QwsStopping *out);

/**
 * Fast-forward search at horizon T. `success` receives the exact post-amplification
 * probability; `found` (may be NULL) the sampled vertex or -1.
 *
 * # Safety
 * `inst` must be a live handle; `success` must be writable.
 */
enum QwsStatus qws_search_fastforward(const struct QwsInstance *inst,
                                      size_t horizon,
                                      uint64_t seed,
                                      double *success,
                                      int64_t *found);

/**
 * Simple search at horizon T; `success` receives the exact single-shot probability.
 *
 * # Safety
 * As for [`qws_search_fastforward`].
 */
enum QwsStatus qws_search_simple(const struct QwsInstance *inst,
                                 size_t horizon,
                                 uint64_t seed,
                                 double *success,
                                 int64_t *found);

/**
 * Runs an invariant suite: "electric", "classical", "quantum", "ffwd", "search" or "all".
 *
 * # Safety
 * `name` must be a valid C string; `out` must be writable.
 */
enum QwsStatus qws_run_suite(const char *name, uint64_t seed, struct QwsReport **out);

/**
 * # Safety
 * `report` must be a live handle; outputs must be writable.
 */
enum QwsStatus qws_report_summary(const struct QwsReport *report, size_t *rows, size_t *failed);

/**
 * Report as JSON (`csv` false) or CSV; free the string with [`qws_string_free`].
 *
 * # Safety
 * `report` must be a live handle; `out` must be writable.
 */
enum QwsStatus qws_report_render(const struct QwsReport *report, bool csv, char **out);

/**
 * # Safety
 * `report` must come from this library and not be freed twice. NULL is a no-op.
 */
void qws_report_free(struct QwsReport *report);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. NULL is a no-op.
 */
void qws_string_free(char *s);

/**
 * Library version as a static C string.
 */
const char *qws_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QWSEARCH_H */
