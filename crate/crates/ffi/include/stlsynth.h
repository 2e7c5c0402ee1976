#ifndef STLSYNTH_H
#define STLSYNTH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum StlsynthCode {
  STLSYNTH_CODE_OK = 0,
  STLSYNTH_CODE_NULL_POINTER = 1,
  STLSYNTH_CODE_INVALID_ARGUMENT = 2,
  STLSYNTH_CODE_DIMENSION = 3,
  STLSYNTH_CODE_PARSE = 4,
  STLSYNTH_CODE_IO = 5,
  STLSYNTH_CODE_NUMERICAL = 6,
  STLSYNTH_CODE_INCONSISTENT_INITIALIZATION = 7,
  STLSYNTH_CODE_INSUFFICIENT_DATA = 8,
  STLSYNTH_CODE_BUFFER_TOO_SMALL = 9,
  STLSYNTH_CODE_PANIC = 10,
} StlsynthCode;

typedef enum StlsynthCost {
  STLSYNTH_COST_INPUT_NORM = 0,
  STLSYNTH_COST_OUTPUT_NORM = 1,
} StlsynthCost;

/**
 * Outcome of a synthesis.
 */
typedef enum StlsynthStatus {
  STLSYNTH_STATUS_FEASIBLE = 0,
  STLSYNTH_STATUS_INFEASIBLE = 1,
  /**
   * A solver limit stopped the search before anything was found.
   */
  STLSYNTH_STATUS_UNKNOWN = 2,
} StlsynthStatus;

typedef struct StlsynthFormula StlsynthFormula;

typedef struct StlsynthResult StlsynthResult;

/**
 * Measured or initialization data.
 */
typedef struct StlsynthTrajectory StlsynthTrajectory;

/**
 * Synthesis settings; start from [`stlsynth_options_default`].
 */
typedef struct StlsynthOptions {
  /**
   * Upper bound on the system order, used for the excitation check.
   */
  size_t n_x_bound;
  /**
   * A [`StlsynthCost`] value.
   */
  int32_t cost;
  /**
   * Input bounds, the same on every channel.
   */
  double u_lo;
  double u_hi;
  double big_m;
  double eps;
  /**
   * Wall-clock limit of the solver in seconds.
   */
  double time_limit;
} StlsynthOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *stlsynth_last_error(void);

/**
 * Library version as a static string.
 */
const char *stlsynth_version(void);

struct StlsynthOptions stlsynth_options_default(void);

/**
 * Builds a trajectory from row-major `u` (`len × n_u`) and `y`
 * (`len × n_y`).
 */
enum StlsynthCode stlsynth_trajectory_new(size_t n_u,
                                          size_t n_y,
                                          size_t len,
                                          const double *u,
                                          const double *y,
                                          struct StlsynthTrajectory **out);

/**
 * Reads a `t,u1..,y1..` CSV file.
 */
enum StlsynthCode stlsynth_trajectory_read_csv(const char *path, struct StlsynthTrajectory **out);

/**
 * Simulates the built-in system `name` from rest under i.i.d. uniform
 * inputs in `[u_lo, u_hi]`. Systems with a disturbance channel get zeros.
 */
enum StlsynthCode stlsynth_generate_data(const char *name,
                                         size_t steps,
                                         double u_lo,
                                         double u_hi,
                                         uint64_t seed,
                                         struct StlsynthTrajectory **out);

size_t stlsynth_trajectory_len(const struct StlsynthTrajectory *traj);

void stlsynth_trajectory_free(struct StlsynthTrajectory *traj);

/**
 * Parses a formula over outputs `y1..y{n_y}`.
 */
enum StlsynthCode stlsynth_formula_parse(const char *src, size_t n_y, struct StlsynthFormula **out);

/**
 * Number of steps after 0 the formula reads; 0 for a null handle.
 */
size_t stlsynth_formula_horizon(const struct StlsynthFormula *phi);

void stlsynth_formula_free(struct StlsynthFormula *phi);

/**
 * Synthesizes inputs for `phi` from `data`, starting after `w_ini`.
 *
 * An infeasible problem is a successful call whose result reports
 * [`StlsynthStatus::Infeasible`].
 */
enum StlsynthCode stlsynth_synthesize(const struct StlsynthTrajectory *data,
                                      const struct StlsynthTrajectory *w_ini,
                                      const struct StlsynthFormula *phi,
                                      const struct StlsynthOptions *options,
                                      struct StlsynthResult **out);

enum StlsynthStatus stlsynth_result_status(const struct StlsynthResult *res);

/**
 * Whether optimality (or infeasibility) was proven.
 */
bool stlsynth_result_optimal(const struct StlsynthResult *res);

/**
 * Objective of the plan; NaN without one.
 */
double stlsynth_result_objective(const struct StlsynthResult *res);

/**
 * Plan length minus one.
 */
size_t stlsynth_result_horizon(const struct StlsynthResult *res);

/**
 * Copies the planned inputs (row-major) into `buf`.
 */
enum StlsynthCode stlsynth_result_inputs(const struct StlsynthResult *res,
                                         double *buf,
                                         size_t cap,
                                         size_t *written);

/**
 * Copies the predicted outputs (row-major) into `buf`.
 */
enum StlsynthCode stlsynth_result_outputs(const struct StlsynthResult *res,
                                          double *buf,
                                          size_t cap,
                                          size_t *written);

/**
 * The initialization the plan starts from: the given one after projection
 * onto the data span. Pass it to [`stlsynth_verify`].
 */
enum StlsynthCode stlsynth_result_initialization(const struct StlsynthResult *res,
                                                 struct StlsynthTrajectory **out);

void stlsynth_result_free(struct StlsynthResult *res);

/**
 * Applies `len` input samples to the built-in system `name` after `w_ini`
 * and monitors `phi`. `*t_fail` is set to the earliest failing step, or
 * `SIZE_MAX` when the formula holds.
 */
enum StlsynthCode stlsynth_verify(const char *name,
                                  const struct StlsynthTrajectory *w_ini,
                                  const double *u,
                                  size_t len,
                                  const struct StlsynthFormula *phi,
                                  bool *satisfied,
                                  size_t *t_fail);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STLSYNTH_H */
