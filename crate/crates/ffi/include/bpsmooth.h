#ifndef BPSMOOTH_H
#define BPSMOOTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by all functions.
 */
typedef enum BpsStatus {
  BPS_STATUS_OK = 0,
  BPS_STATUS_NULL_POINTER = 1,
  BPS_STATUS_INVALID_INSTANCE = 2,
  BPS_STATUS_PARSE = 3,
  BPS_STATUS_PARAMETER = 4,
  BPS_STATUS_CAP = 5,
  BPS_STATUS_INFEASIBLE = 6,
  BPS_STATUS_NOT_OPTIMAL = 7,
  BPS_STATUS_WRONG_KIND = 8,
  BPS_STATUS_IO = 9,
  BPS_STATUS_PANIC = 10,
} BpsStatus;

/**
 * Opaque handle to a bipartite instance or a flow network.
 */
typedef struct BpsInstance BpsInstance;

/**
 * Outcome of a BP run.
 */
typedef struct BpsRunResult {
  /**
   * First iteration of the stable window, valid when `converged` is set.
   */
  uint64_t tau;
  bool converged;
  uint64_t last_iteration;
  bool is_matching;
  bool tie_detected;
} BpsRunResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a bipartite instance from `m` edges given as parallel arrays of
 * 0-based left index, 0-based right index and weight.
 *
 * # Safety
 * Each array must hold `m` readable elements; `out` must be writable.
 */
enum BpsStatus bps_instance_from_edges(size_t n_left,
                                       size_t n_right,
                                       const size_t *left,
                                       const size_t *right,
                                       const double *weight,
                                       size_t m,
                                       struct BpsInstance **out);

/**
 * Builds a complete bipartite instance from a row-major weight matrix.
 *
 * # Safety
 * `weights` must hold `n_left * n_right` readable values; `out` must be writable.
 */
enum BpsStatus bps_instance_from_matrix(size_t n_left,
                                        size_t n_right,
                                        const double *weights,
                                        struct BpsInstance **out);

/**
 * Parses an instance in the text format (`bip` or `flow` header).
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum BpsStatus bps_instance_parse(const char *text, struct BpsInstance **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `inst` must come from this library and not be used afterwards.
 */
void bps_instance_free(struct BpsInstance *inst);

/**
 * Returns 1 for a flow network, 0 for a bipartite instance, -1 for null.
 *
 * # Safety
 * `inst` must be a live handle or null.
 */
int32_t bps_instance_is_flow(const struct BpsInstance *inst);

/**
 * Left and right node counts of a bipartite instance.
 *
 * # Safety
 * `inst` must be a live handle; the out pointers must be writable.
 */
enum BpsStatus bps_instance_size(const struct BpsInstance *inst, size_t *n_left, size_t *n_right);

/**
 * Runs max-product BP until `window` identical valid decodings or `t_max`
 * iterations. `assignment` receives one right index per left node, -1 when
 * unmatched.
 *
 * # Safety
 * `inst` must be a live bipartite handle, `assignment` must hold `n_left`
 * writable entries and `result` must be writable.
 */
enum BpsStatus bps_run(const struct BpsInstance *inst,
                       size_t t_max,
                       size_t window,
                       int64_t *assignment,
                       struct BpsRunResult *result);

/**
 * Maximum-weight matching in the same assignment layout as [`bps_run`].
 *
 * # Safety
 * As for [`bps_run`]; `weight` must be writable.
 */
enum BpsStatus bps_max_weight_matching(const struct BpsInstance *inst,
                                       int64_t *assignment,
                                       double *weight);

/**
 * Gap between the best and second-best matching, +inf when only one exists.
 * Fails with `Cap` on instances too large to enumerate.
 *
 * # Safety
 * `inst` must be a live bipartite handle; `delta` must be writable.
 */
enum BpsStatus bps_matching_delta(const struct BpsInstance *inst, double *delta);

/**
 * Min-cost flow cost and the cost of the cheapest residual cycle at that
 * flow, +inf when the residual graph has no cycle.
 *
 * # Safety
 * `inst` must be a live flow handle; the out pointers must be writable.
 */
enum BpsStatus bps_flow_gap(const struct BpsInstance *inst, double *cost, double *cycle_gap);

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *bps_last_error(void);

/**
 * Static name of a status code.
 */
const char *bps_status_name(enum BpsStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BPSMOOTH_H */
