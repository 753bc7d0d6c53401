#ifndef KDVFB_H
#define KDVFB_H

/* Generated by cbindgen from the kdvfb-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum KdvfbStatus {
  KDVFB_STATUS_OK = 0,
  KDVFB_STATUS_NULL_POINTER = 1,
  KDVFB_STATUS_INVALID_ARGUMENT = 2,
  KDVFB_STATUS_DOMAIN = 3,
  KDVFB_STATUS_SYNTHESIS_FAILED = 4,
  KDVFB_STATUS_BLOW_UP = 5,
  KDVFB_STATUS_IO = 6,
  KDVFB_STATUS_BUFFER_TOO_SMALL = 7,
  KDVFB_STATUS_INTERNAL = 8,
} KdvfbStatus;

// Class of a length.
typedef enum KdvfbClass {
  KDVFB_CLASS_C = 0,
  KDVFB_CLASS_N1 = 1,
  KDVFB_CLASS_N2 = 2,
  KDVFB_CLASS_N3 = 3,
  KDVFB_CLASS_N4 = 4,
} KdvfbClass;

// State the feedback reads on each step.
typedef enum KdvfbMode {
  KDVFB_MODE_DELAYED = 0,
  KDVFB_MODE_PER_STEP = 1,
} KdvfbMode;

// Discretized problem with its steering library.
typedef struct KdvfbProblem KdvfbProblem;

// State on the grid of a [`KdvfbProblem`].
typedef struct KdvfbState KdvfbState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` with a
// terminating NUL. Returns the message length without the NUL; if that is
// `>= len` the message was truncated.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t kdvfb_last_error_message(char *buf, size_t len);

// Classifies `length` and reports the dimension of M.
//
// # Safety
// `class_out` and `dim_out` must be valid for writes.
enum KdvfbStatus kdvfb_classify(double length, enum KdvfbClass *class_out, size_t *dim_out);

// Builds the problem on `nodes` grid nodes and its steering library.
// `dt <= 0` selects the default step.
//
// # Safety
// `out` must be valid for writes.
enum KdvfbStatus kdvfb_problem_new(double length,
                                   size_t nodes,
                                   double dt,
                                   struct KdvfbProblem **out);

// Releases a problem; null is ignored.
//
// # Safety
// `p` must be null or a handle from [`kdvfb_problem_new`] not yet freed.
void kdvfb_problem_free(struct KdvfbProblem *p);

// Period, time step, dimension of M and margin of the feedback.
//
// # Safety
// `p` must be a live handle; outputs must be null or valid for writes.
enum KdvfbStatus kdvfb_problem_info(const struct KdvfbProblem *p,
                                    double *period,
                                    double *dt,
                                    size_t *modal_dim,
                                    double *delta);

// Writes the steering library to `path` (UTF-8, NUL-terminated).
//
// # Safety
// `p` must be a live handle and `path` a valid C string.
enum KdvfbStatus kdvfb_problem_save_library(const struct KdvfbProblem *p, const char *path);

// Feedback `u_eps(t, y)` for modal coefficients `modal` of `P_M y`.
//
// # Safety
// `p` must be a live handle, `modal` must hold `len` values and `out` be
// valid for writes.
enum KdvfbStatus kdvfb_feedback(const struct KdvfbProblem *p,
                                double epsilon,
                                double t,
                                const double *modal,
                                size_t len,
                                double *out);

// State with `modal` coefficients in M plus the projection of the
// piecewise-linear interpolant of `nodal` (one value per grid node, or
// null for none) onto H.
//
// # Safety
// `p` must be a live handle; `modal` must hold `modal_len` values and
// `nodal` either be null or hold `nodal_len` values; `out` must be valid
// for writes.
enum KdvfbStatus kdvfb_state_new(const struct KdvfbProblem *p,
                                 const double *modal,
                                 size_t modal_len,
                                 const double *nodal,
                                 size_t nodal_len,
                                 struct KdvfbState **out);

// Releases a state; null is ignored.
//
// # Safety
// `s` must be null or a handle from this library not yet freed.
void kdvfb_state_free(struct KdvfbState *s);

// `|P_H y|` and `|P_M y|`.
//
// # Safety
// `s` must be a live handle; outputs must be valid for writes.
enum KdvfbStatus kdvfb_state_norms(const struct KdvfbState *s, double *norm_h, double *norm_m);

// Nodal values of the state into `buf` of `len` entries.
//
// # Safety
// `s` must be a live handle and `buf` hold `len` writable values.
enum KdvfbStatus kdvfb_state_values(const struct KdvfbState *s, double *buf, size_t len);

// Integrates the closed loop with gain `epsilon` (0 for no feedback) over
// `duration` from `state`, which is replaced by the final state.
//
// # Safety
// `p` must be a live handle and `s` a live state created from it.
enum KdvfbStatus kdvfb_closed_loop(const struct KdvfbProblem *p,
                                   double epsilon,
                                   enum KdvfbMode mode,
                                   double duration,
                                   struct KdvfbState *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KDVFB_H */
