#ifndef POSE2FLIGHT_H
#define POSE2FLIGHT_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * View codes: 0 front, 1 side, 2 back, 3 ambiguous.
 */
#define P2F_VIEW_FRONT 0

#define P2F_VIEW_SIDE 1

#define P2F_VIEW_BACK 2

#define P2F_VIEW_AMBIGUOUS 3

/**
 * Gesture code meaning "no gesture".
 */
#define P2F_GESTURE_NONE -1

#define P2F_GESTURE_UP 0

#define P2F_GESTURE_DOWN 1

#define P2F_GESTURE_LEFT 2

#define P2F_GESTURE_RIGHT 3

#define P2F_GESTURE_FORWARD 4

#define P2F_GESTURE_BACKWARD 5

#define P2F_GESTURE_CW 6

#define P2F_GESTURE_CCW 7

#define P2F_GESTURE_CHEESE 8

#define P2F_GESTURE_SIDE_LEFT 9

#define P2F_GESTURE_SIDE_RIGHT 10

/**
 * Length of a distance posterior.
 */
#define P2F_NUM_CLASSES 5

typedef enum P2fStatus {
  P2F_STATUS_OK = 0,
  P2F_STATUS_NULL_POINTER = 1,
  P2F_STATUS_INVALID_UTF8 = 2,
  P2F_STATUS_PARSE = 3,
  P2F_STATUS_SCHEMA = 4,
  P2F_STATUS_MISSING_JOINT = 5,
  P2F_STATUS_OUT_OF_RANGE = 6,
  P2F_STATUS_MODEL = 7,
  P2F_STATUS_IO = 8,
  P2F_STATUS_BUFFER_TOO_SMALL = 9,
  P2F_STATUS_PANIC = 10,
  P2F_STATUS_OTHER = 99,
} P2fStatus;

/**
 * Opaque distance model.
 */
typedef struct P2fDistanceModel P2fDistanceModel;

/**
 * Opaque simulated drone.
 */
typedef struct P2fDrone P2fDrone;

/**
 * Opaque skeleton frame.
 */
typedef struct P2fFrame P2fFrame;

/**
 * Opaque temporal stability filter.
 */
typedef struct P2fStability P2fStability;

typedef struct P2fBBox {
  double x_min;
  double y_min;
  double x_max;
  double y_max;
} P2fBBox;

typedef struct P2fDroneState {
  double x;
  double y;
  double z;
  double yaw;
  double battery;
  bool flying;
  uint64_t sim_time_ms;
} P2fDroneState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *p2f_version(void);

/**
 * Copies the last error message of this thread into `buf`. Returns the
 * message length, 0 when there is none, or -1 if `buf` is too small.
 *
 * # Safety
 * `buf` must point to `len` writable bytes.
 */
int64_t p2f_last_error(char *buf, size_t len);

/**
 * Name of gesture code `code`, or NULL for an unknown code.
 */
const char *p2f_gesture_name(int32_t code);

/**
 * Parses one skeleton stream line.
 *
 * # Safety
 * `line` must be a NUL-terminated string; `out` must be writable.
 */
enum P2fStatus p2f_frame_parse(const char *line, struct P2fFrame **out);

/**
 * # Safety
 * `frame` must come from `p2f_frame_parse` or be NULL.
 */
void p2f_frame_free(struct P2fFrame *frame);

/**
 * Reads joint `id` (0..18). Missing joints have confidence 0.
 *
 * # Safety
 * `frame` must be a live handle; the out pointers must be writable.
 */
enum P2fStatus p2f_frame_joint(const struct P2fFrame *frame,
                               uint32_t id,
                               double *x,
                               double *y,
                               double *c);

/**
 * # Safety
 * `frame` must be a live handle; `out_view` must be writable.
 */
enum P2fStatus p2f_classify_view(const struct P2fFrame *frame, double gamma, int32_t *out_view);

/**
 * Single-frame gesture; writes `P2F_GESTURE_NONE` when nothing matches.
 *
 * # Safety
 * `frame` must be a live handle; `out_gesture` must be writable.
 */
enum P2fStatus p2f_recognize(const struct P2fFrame *frame,
                             int32_t view,
                             double beta,
                             int32_t *out_gesture);

/**
 * # Safety
 * `frame` must be a live handle; `out` must be writable.
 */
enum P2fStatus p2f_head_bbox(const struct P2fFrame *frame, struct P2fBBox *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum P2fStatus p2f_stability_new(uint32_t n_frames,
                                 uint64_t cooldown_ms,
                                 struct P2fStability **out);

/**
 * Feeds one classification; `out_event` receives the emitted gesture or
 * `P2F_GESTURE_NONE`.
 *
 * # Safety
 * `filter` must be a live handle; `out_event` must be writable.
 */
enum P2fStatus p2f_stability_step(struct P2fStability *filter,
                                  int32_t gesture,
                                  uint64_t timestamp_ms,
                                  int32_t *out_event);

/**
 * # Safety
 * `filter` must come from `p2f_stability_new` or be NULL.
 */
void p2f_stability_free(struct P2fStability *filter);

/**
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum P2fStatus p2f_distance_model_load(const char *path, struct P2fDistanceModel **out);

/**
 * # Safety
 * `model` must come from `p2f_distance_model_load` or be NULL.
 */
void p2f_distance_model_free(struct P2fDistanceModel *model);

/**
 * Distance of the person in `frame`. `posterior` may be NULL; otherwise
 * it receives `P2F_NUM_CLASSES` values.
 *
 * # Safety
 * Handles must be live; `out_cm` writable; `posterior` NULL or writable
 * for `P2F_NUM_CLASSES` doubles.
 */
enum P2fStatus p2f_distance_estimate(const struct P2fDistanceModel *model,
                                     const struct P2fFrame *frame,
                                     int32_t view,
                                     double *out_cm,
                                     double *posterior);

/**
 * Continuous readout of a class posterior.
 *
 * # Safety
 * `posterior` must hold `P2F_NUM_CLASSES` doubles; `out_cm` writable.
 */
enum P2fStatus p2f_continuous_distance(const double *posterior, double *out_cm);

/**
 * A grounded drone with default parameters and the given seed.
 *
 * # Safety
 * `out` must be writable.
 */
enum P2fStatus p2f_drone_new(uint64_t seed, struct P2fDrone **out);

/**
 * # Safety
 * `drone` must come from `p2f_drone_new` or be NULL.
 */
void p2f_drone_free(struct P2fDrone *drone);

/**
 * Sends one SDK text command. An immediate reply is copied to `reply`;
 * a deferred one writes an empty string and sets `*deferred`.
 *
 * # Safety
 * `drone` live; `text` NUL-terminated; `reply` writable for `len` bytes;
 * `deferred` writable.
 */
enum P2fStatus p2f_drone_command(struct P2fDrone *drone,
                                 const char *text,
                                 char *reply,
                                 size_t len,
                                 bool *deferred);

/**
 * Advances simulated time; `*completed` receives the number of deferred
 * replies that became due.
 *
 * # Safety
 * `drone` live; `completed` NULL or writable.
 */
enum P2fStatus p2f_drone_advance(struct P2fDrone *drone, uint64_t duration_ms, uint32_t *completed);

/**
 * # Safety
 * `drone` live; `out` writable.
 */
enum P2fStatus p2f_drone_state(const struct P2fDrone *drone, struct P2fDroneState *out);

/**
 * Telemetry line in the SDK push format.
 *
 * # Safety
 * `drone` live; `buf` writable for `len` bytes.
 */
enum P2fStatus p2f_drone_telemetry(const struct P2fDrone *drone, char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSE2FLIGHT_H */
