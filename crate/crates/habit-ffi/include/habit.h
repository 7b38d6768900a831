/* C interface for the habit trajectory-imputation library. */

#ifndef HABIT_FFI_H
#define HABIT_FFI_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>


/**
 * Inverse projection choice.
 */
typedef enum HabitProjection {
  HABIT_PROJECTION_CENTER = 0,
  HABIT_PROJECTION_MEDIAN = 1,
} HabitProjection;

/**
 * Path-search cost model.
 */
typedef enum HabitCostMode {
  HABIT_COST_MODE_HOPS = 0,
  HABIT_COST_MODE_INVERSE_FREQUENCY = 1,
} HabitCostMode;

/**
 * Behavior when the graph cannot answer a gap.
 */
typedef enum HabitFallback {
  HABIT_FALLBACK_ERROR = 0,
  HABIT_FALLBACK_STRAIGHT_LINE = 1,
} HabitFallback;

/**
 * Result code of an FFI call.
 */
typedef enum HabitStatus {
  HABIT_STATUS_OK = 0,
  HABIT_STATUS_NULL_ARGUMENT = 1,
  HABIT_STATUS_INVALID_ARGUMENT = 2,
  HABIT_STATUS_UTF8_ERROR = 3,
  HABIT_STATUS_LOAD_FAILED = 4,
  HABIT_STATUS_OFF_NETWORK = 5,
  HABIT_STATUS_UNREACHABLE = 6,
  HABIT_STATUS_INVALID_GAP = 7,
  HABIT_STATUS_INDEX_OUT_OF_RANGE = 8,
  HABIT_STATUS_INTERNAL_ERROR = 9,
} HabitStatus;

/**
 * Which generator produced a path.
 */
typedef enum HabitMethod {
  HABIT_METHOD_HABIT = 0,
  HABIT_METHOD_SLI = 1,
} HabitMethod;

/**
 * An immutable traffic graph loaded from a file.
 */
typedef struct HabitGraph HabitGraph;

/**
 * An imputed, timestamped path.
 */
typedef struct HabitPath HabitPath;

/**
 * Imputation settings; get defaults from `habit_impute_options_default`.
 */
typedef struct HabitImputeOptions {
  enum HabitProjection projection;
  /**
   * Simplification tolerance, meters (>= 0).
   */
  double tolerance_m;
  enum HabitCostMode cost_mode;
  /**
   * Ring limit when snapping endpoints to graph nodes.
   */
  uint32_t k_max;
  enum HabitFallback fallback;
  /**
   * Point spacing of straight-line fallback output, meters (> 0).
   */
  double fallback_spacing_m;
} HabitImputeOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent failing call on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *habit_last_error_message(void);

/**
 * Default imputation options: median projection, 250 m tolerance, hop-count
 * cost, 16-ring snapping, straight-line fallback at 250 m spacing.
 */
struct HabitImputeOptions habit_impute_options_default(void);

/**
 * Load a graph file produced by the `habit build` pipeline.
 *
 * On success writes a handle to `out_graph`; free it with
 * `habit_graph_free`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out_graph` a valid
 * pointer.
 */
enum HabitStatus habit_graph_load(const char *path, struct HabitGraph **out_graph);

/**
 * Free a graph handle. Null is a no-op.
 *
 * # Safety
 * `graph` must come from `habit_graph_load` and not be freed twice.
 */
void habit_graph_free(struct HabitGraph *graph);

/**
 * H3 resolution of the graph, or 255 for a null handle.
 *
 * # Safety
 * `graph` must be null or a live handle.
 */
uint8_t habit_graph_resolution(const struct HabitGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
uint64_t habit_graph_node_count(const struct HabitGraph *graph);

/**
 * # Safety
 * `graph` must be null or a live handle.
 */
uint64_t habit_graph_edge_count(const struct HabitGraph *graph);

/**
 * Impute the gap between two timestamped positions (UTC milliseconds).
 *
 * `options` may be null for defaults. On success writes a path handle to
 * `out_path`; free it with `habit_path_free`.
 *
 * # Safety
 * `graph` must be a live handle; `options` null or valid; `out_path` valid.
 */
enum HabitStatus habit_impute(const struct HabitGraph *graph,
                              double start_lon,
                              double start_lat,
                              int64_t start_ts_ms,
                              double end_lon,
                              double end_lat,
                              int64_t end_ts_ms,
                              const struct HabitImputeOptions *options,
                              struct HabitPath **out_path);

/**
 * Number of points in the path (0 for a null handle).
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t habit_path_len(const struct HabitPath *path);

/**
 * Read one point of the path into the out-parameters.
 *
 * # Safety
 * `path` must be null or a live handle; out-parameters must be valid.
 */
enum HabitStatus habit_path_point(const struct HabitPath *path,
                                  size_t index,
                                  double *out_lon,
                                  double *out_lat,
                                  int64_t *out_ts_ms);

/**
 * Which generator produced the path. Null handles report the baseline.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
enum HabitMethod habit_path_method(const struct HabitPath *path);

/**
 * True when the configured fallback produced the path.
 *
 * # Safety
 * `path` must be null or a live handle.
 */
bool habit_path_fallback_used(const struct HabitPath *path);

/**
 * Number of cells in the path's cell sequence (0 for SLI paths).
 *
 * # Safety
 * `path` must be null or a live handle.
 */
size_t habit_path_cell_count(const struct HabitPath *path);

/**
 * Read one H3 cell index of the path's cell sequence.
 *
 * # Safety
 * `path` must be null or a live handle; `out_cell` must be valid.
 */
enum HabitStatus habit_path_cell(const struct HabitPath *path, size_t index, uint64_t *out_cell);

/**
 * Free a path handle. Null is a no-op.
 *
 * # Safety
 * `path` must come from `habit_impute` and not be freed twice.
 */
void habit_path_free(struct HabitPath *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HABIT_FFI_H */
