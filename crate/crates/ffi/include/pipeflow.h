#ifndef PIPEFLOW_H
#define PIPEFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_IO = 3,
  PF_STATUS_MOTION = 4,
  PF_STATUS_SELECTION = 5,
  PF_STATUS_SCHEDULE = 6,
  PF_STATUS_OVERFLOW = 7,
  PF_STATUS_PANIC = 8,
} PfStatus;

/**
 * Indices of the frames kept by selection.
 */
typedef struct PfSelection PfSelection;

/**
 * Loaded frames.
 */
typedef struct PfSequence PfSequence;

/**
 * A finished schedule with the tasks and pool it ran on.
 */
typedef struct PfTrace PfTrace;

/**
 * Closed-form time predictions. `t_async` is `t_async_num / t_async_den`.
 */
typedef struct PfPredictedTimes {
  uint64_t t_serial;
  uint64_t t_async_num;
  uint64_t t_async_den;
  double t_async;
  uint64_t t_serial_sum;
  uint64_t pipeline_bound;
} PfPredictedTimes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *pf_last_error_message(void);

/**
 * Static version string.
 */
const char *pf_version(void);

/**
 * # Safety
 * `s` must come from a pipeflow function that returns an owned string, or be null.
 */
void pf_string_free(char *s);

/**
 * Global SSIM of two 8-bit gray images of `width * height` bytes each.
 *
 * # Safety
 * `a` and `b` must point to `width * height` readable bytes; `out` must be writable.
 */
enum PfStatus pf_ssim_gray(const uint8_t *a,
                           const uint8_t *b,
                           uint32_t width,
                           uint32_t height,
                           double *out);

/**
 * Mean optical-flow magnitude from `a` to `b` with the default flow settings.
 *
 * # Safety
 * Same as [`pf_ssim_gray`].
 */
enum PfStatus pf_mean_flow_magnitude(const uint8_t *a,
                                     const uint8_t *b,
                                     uint32_t width,
                                     uint32_t height,
                                     double *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum PfStatus pf_predict_times(uint64_t n1,
                               uint64_t n2,
                               uint64_t t1,
                               uint64_t t2,
                               uint64_t batches,
                               struct PfPredictedTimes *out);

/**
 * Loads every frame of the sequence directory `dir` into memory. `*out` is
 * null on failure.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum PfStatus pf_sequence_load(const char *dir, struct PfSequence **out);

/**
 * Number of frames, or 0 for null.
 *
 * # Safety
 * `seq` must be a live handle or null.
 */
size_t pf_sequence_len(const struct PfSequence *seq);

/**
 * # Safety
 * `seq` must be a live handle; the out pointers must be writable.
 */
enum PfStatus pf_sequence_shape(const struct PfSequence *seq,
                                uint32_t *width,
                                uint32_t *height,
                                uint8_t *channels);

/**
 * # Safety
 * `seq` must come from [`pf_sequence_load`] and not be freed twice.
 */
void pf_sequence_free(struct PfSequence *seq);

/**
 * Runs frame selection with thresholds `tau_s` (SSIM) and `tau_f` (pixels).
 *
 * # Safety
 * `seq` must be a live handle; `out` must be writable.
 */
enum PfStatus pf_select(const struct PfSequence *seq,
                        double tau_s,
                        double tau_f,
                        struct PfSelection **out);

/**
 * Number of selected frames, or 0 for null.
 *
 * # Safety
 * `sel` must be a live handle or null.
 */
size_t pf_selection_len(const struct PfSelection *sel);

/**
 * Copies up to `cap` selected indices into `buf`, ascending.
 *
 * # Safety
 * `sel` must be a live handle; `buf` must have room for `cap` values.
 */
enum PfStatus pf_selection_indices(const struct PfSelection *sel,
                                   size_t *buf,
                                   size_t cap,
                                   size_t *written);

/**
 * # Safety
 * `sel` must come from [`pf_select`] and not be freed twice.
 */
void pf_selection_free(struct PfSelection *sel);

/**
 * Simulates `n` invert/edit pairs with durations `t1[i]`, `t2[i]` (ticks)
 * on `workers` workers of `capacity` memory units. Every task needs one
 * unit. With `dedicated`, even workers only invert and odd ones only edit.
 *
 * # Safety
 * `t1` and `t2` must hold `n` values each; `out` must be writable.
 */
enum PfStatus pf_schedule_two_stage(const uint64_t *t1,
                                    const uint64_t *t2,
                                    size_t n,
                                    size_t workers,
                                    uint64_t capacity,
                                    bool dedicated,
                                    struct PfTrace **out);

/**
 * Makespan in ticks, or NaN for null.
 *
 * # Safety
 * `trace` must be a live handle or null.
 */
double pf_trace_makespan(const struct PfTrace *trace);

/**
 * Number of constraint violations found when checking the trace.
 *
 * # Safety
 * `trace` must be a live handle or null.
 */
size_t pf_trace_violation_count(const struct PfTrace *trace);

/**
 * The trace as JSON. Free the result with [`pf_string_free`]. Null on failure.
 *
 * # Safety
 * `trace` must be a live handle.
 */
char *pf_trace_to_json(const struct PfTrace *trace);

/**
 * # Safety
 * `trace` must come from [`pf_schedule_two_stage`] and not be freed twice.
 */
void pf_trace_free(struct PfTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIPEFLOW_H */
