#ifndef SKEWPROD_H
#define SKEWPROD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_INVALID_ARGUMENT = 1,
  SP_STATUS_HYPOTHESIS_FAILED = 2,
  SP_STATUS_NO_CONVERGENCE = 3,
  SP_STATUS_NULL_POINTER = 4,
  SP_STATUS_BUFFER_TOO_SMALL = 5,
  SP_STATUS_INTERNAL = 6,
} SpStatus;

typedef enum SpGraphKind {
  SP_GRAPH_KIND_UPPER = 0,
  SP_GRAPH_KIND_LOWER = 1,
  SP_GRAPH_KIND_MIDDLE = 2,
} SpGraphKind;

typedef enum SpMeasure {
  SP_MEASURE_LEBESGUE = 0,
  /**
   * Independent digits, `1` with the given probability.
   */
  SP_MEASURE_BERNOULLI = 1,
} SpMeasure;

typedef struct SpGraph SpGraph;

typedef struct SpReport SpReport;

/**
 * A forced arctan family over a baker map.
 */
typedef struct SpSystem SpSystem;

typedef struct SpCertificate {
  bool pass;
  double eps0;
  double expansion_margin;
  double invariance_margin;
  double schwarzian_max;
  double slope_min;
} SpCertificate;

typedef struct SpDimension {
  /**
   * False when the pinched set is empty at this order.
   */
  bool feasible;
  double s_star;
  double q_star;
  double dimension;
  /**
   * NaN when the primal check was skipped.
   */
  double gap;
} SpDimension;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread.  The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *sp_last_error(void);

/**
 * # Safety
 * `out_sys` must be a valid pointer.
 */
enum SpStatus sp_system_new(double r, double eps, double a, struct SpSystem **out_sys);

/**
 * # Safety
 * `sys` must come from [`sp_system_new`] and not be used afterwards.
 */
void sp_system_free(struct SpSystem *sys);

/**
 * Certify the hypotheses on `I = [i_lo, i_hi]` inside `J = [j_lo, j_hi]`.
 * A failed certificate is reported through `out_cert.pass`, not the status.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_check_hypotheses(const struct SpSystem *sys,
                                  double i_lo,
                                  double i_hi,
                                  double j_lo,
                                  double j_hi,
                                  size_t grid,
                                  struct SpCertificate *out_cert);

/**
 * Fixed points of `f_x` in `[lo, hi]`, increasing.  Writes at most `cap`
 * values and the total count to `out_len`; returns `BufferTooSmall` when
 * `cap` is short.
 *
 * # Safety
 * `ys` and `slopes` must hold `cap` doubles (or be null when `cap` is 0).
 */
enum SpStatus sp_fixed_points(const struct SpSystem *sys,
                              double x,
                              double lo,
                              double hi,
                              double *ys,
                              double *slopes,
                              size_t cap,
                              size_t *out_len);

/**
 * Invariant graph on `n` nodes.  Bounding graphs are pullbacks of depth
 * `depth` from `-anchor`/`+anchor`; the middle graph starts at `0` and is
 * kept inside `[-anchor, anchor]`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_graph_new(const struct SpSystem *sys,
                           enum SpGraphKind kind,
                           size_t n,
                           size_t depth,
                           double anchor,
                           uint64_t seed,
                           struct SpGraph **out_graph);

/**
 * # Safety
 * `graph` must come from [`sp_graph_new`] and not be used afterwards.
 */
void sp_graph_free(struct SpGraph *graph);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `graph` must be null or valid.
 */
size_t sp_graph_len(const struct SpGraph *graph);

/**
 * Interpolated value at `x`; NaN for a null handle.
 *
 * # Safety
 * `graph` must be null or valid.
 */
double sp_graph_eval(const struct SpGraph *graph, double x);

/**
 * Copy node abscissae and values into buffers of length `cap`.
 *
 * # Safety
 * `xs` and `values` must hold `cap` doubles.
 */
enum SpStatus sp_graph_values(const struct SpGraph *graph, double *xs, double *values, size_t cap);

/**
 * Fibre exponent of the graph for a base measure.  `p1` is only read for
 * `Bernoulli`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_graph_exponent(const struct SpSystem *sys,
                                const struct SpGraph *graph,
                                enum SpMeasure measure,
                                double p1,
                                size_t samples,
                                uint64_t seed,
                                double *out_value,
                                double *out_stderr);

/**
 * Classify with the default settings except for grid, depth and seed.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_classify(const struct SpSystem *sys,
                          size_t grid,
                          size_t depth,
                          uint64_t seed,
                          struct SpReport **out_report);

/**
 * # Safety
 * `report` must come from [`sp_classify`] and not be used afterwards.
 */
void sp_report_free(struct SpReport *report);

/**
 * `'A'` or `'B'`; `0` for a null handle.
 *
 * # Safety
 * `report` must be null or valid.
 */
char sp_report_case(const struct SpReport *report);

/**
 * Smallest refined gap between the bounding graphs; NaN for a null handle.
 *
 * # Safety
 * `report` must be null or valid.
 */
double sp_report_min_gap(const struct SpReport *report);

/**
 * Report as `key: value` lines, owned by the handle.
 *
 * # Safety
 * `report` must be null or valid.
 */
const char *sp_report_text(const struct SpReport *report);

/**
 * Dimension estimate from the graph's potential at cylinder order `order`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_dimension(const struct SpSystem *sys,
                           const struct SpGraph *graph,
                           size_t order,
                           bool check,
                           struct SpDimension *out_dim);

/**
 * Number of sign changes of `y` along a seeded trajectory from `y0`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum SpStatus sp_count_crossings(const struct SpSystem *sys,
                                 uint64_t seed,
                                 double y0,
                                 uint64_t steps,
                                 uint64_t *out_count);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKEWPROD_H */
