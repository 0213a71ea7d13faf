#ifndef SVGVULN_H
#define SVGVULN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Non-zero values match the command-line exit codes.
 */
typedef enum SvgvStatus {
  SVGV_STATUS_OK = 0,
  SVGV_STATUS_INVALID_ARGUMENT = 1,
  SVGV_STATUS_IO = 2,
  SVGV_STATUS_FORMAT = 3,
  SVGV_STATUS_CONFIG = 4,
  SVGV_STATUS_NUMERIC = 5,
} SvgvStatus;

/**
 * Opaque graph handle.
 */
typedef struct SvgvGraph SvgvGraph;

/**
 * Opaque model handle.
 */
typedef struct SvgvModel SvgvModel;

/**
 * Per-kind edge counts of a graph.
 */
typedef struct SvgvEdgeCounts {
  size_t nodes;
  size_t sequential;
  size_t data_flow;
  size_t control_flow;
  size_t poacher_data_processing;
  size_t poacher_access_control;
  size_t poacher_resource_management;
  size_t total;
} SvgvEdgeCounts;

/**
 * Detection result for one function.
 */
typedef struct SvgvPrediction {
  /**
   * Probability of the vulnerable class.
   */
  double vulnerable;
  /**
   * Index of the most likely CWE class (0 is benign).
   */
  size_t cwe_class;
  /**
   * Number of Poacher edges cited for the verdict.
   */
  size_t cited_edges;
} SvgvPrediction;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *svgv_last_error(void);

/**
 * Builds the graph of a NUL-terminated C/C++ function with the default
 * analysis settings.
 *
 * # Safety
 * `source` must be a valid C string and `out` a valid pointer.
 */
enum SvgvStatus svgv_graph_build(const char *source, struct SvgvGraph **out);

/**
 * # Safety
 * `graph` must come from [`svgv_graph_build`] and not be used afterwards.
 */
void svgv_graph_free(struct SvgvGraph *graph);

/**
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum SvgvStatus svgv_graph_edge_counts(const struct SvgvGraph *graph, struct SvgvEdgeCounts *out);

/**
 * Graph as JSON. Free the result with [`svgv_string_free`].
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum SvgvStatus svgv_graph_to_json(const struct SvgvGraph *graph, char **out);

/**
 * Graph in Graphviz DOT form. Free the result with [`svgv_string_free`].
 *
 * # Safety
 * `graph` must be a live handle and `out` a valid pointer.
 */
enum SvgvStatus svgv_graph_to_dot(const struct SvgvGraph *graph, char **out);

/**
 * Loads a checkpoint written by the training pipeline.
 *
 * # Safety
 * `path` must be a valid C string and `out` a valid pointer.
 */
enum SvgvStatus svgv_model_load(const char *path, struct SvgvModel **out);

/**
 * # Safety
 * `model` must come from [`svgv_model_load`] and not be used afterwards.
 */
void svgv_model_free(struct SvgvModel *model);

/**
 * Classifies one function.
 *
 * # Safety
 * `model` must be a live handle, `source` a valid C string and `out` a
 * valid pointer.
 */
enum SvgvStatus svgv_model_predict(const struct SvgvModel *model,
                                   const char *source,
                                   struct SvgvPrediction *out);

/**
 * Full prediction report as JSON. Free the result with [`svgv_string_free`].
 *
 * # Safety
 * `model` must be a live handle, `source` a valid C string and `out` a
 * valid pointer.
 */
enum SvgvStatus svgv_model_predict_json(const struct SvgvModel *model,
                                        const char *source,
                                        char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void svgv_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SVGVULN_H */
