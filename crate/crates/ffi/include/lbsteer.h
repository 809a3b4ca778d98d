#ifndef LBSTEER_H
#define LBSTEER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LbsStatus {
  LBS_STATUS_OK = 0,
  LBS_STATUS_NULL_POINTER = 1,
  LBS_STATUS_INVALID_ARGUMENT = 2,
  LBS_STATUS_SCENARIO = 3,
  LBS_STATUS_DIVERGED = 4,
  LBS_STATUS_PROTOCOL = 5,
  LBS_STATUS_IO = 6,
  // The output buffer is too small; the required size was written.
  LBS_STATUS_BUFFER_TOO_SMALL = 7,
  // The decoder needs more bytes before the next message is complete.
  LBS_STATUS_NEED_MORE = 8,
  LBS_STATUS_PANIC = 9,
} LbsStatus;

// Opaque incremental message decoder.
typedef struct LbsDecoder LbsDecoder;

// Opaque running server.
typedef struct LbsServer LbsServer;

// Opaque simulation handle.
typedef struct LbsSim LbsSim;

// Shape of a rendered field.
typedef struct LbsFrameShape {
  uint32_t width;
  uint32_t height;
  uint32_t components;
  // Number of f32 values, `width * height * components`.
  uint64_t len;
} LbsFrameShape;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *lbs_last_error(void);

uint16_t lbs_protocol_version(void);

uint32_t lbs_max_message_len(void);

// Builds a simulation from a scenario file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum LbsStatus lbs_sim_from_file(const char *path, uint64_t seed, struct LbsSim **out);

// Builds a simulation from scenario text.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a writable pointer.
enum LbsStatus lbs_sim_from_text(const char *text, uint64_t seed, struct LbsSim **out);

// # Safety
// `sim` must come from `lbs_sim_from_*` and not have been freed.
void lbs_sim_free(struct LbsSim *sim);

// Advances `n` iterations. On divergence the simulation stays at the
// last stable state and `LBS_STATUS_DIVERGED` is returned.
//
// # Safety
// `sim` must be a live handle.
enum LbsStatus lbs_sim_step(struct LbsSim *sim, uint64_t n);

// # Safety
// `sim` must be a live handle or null (which yields 0).
uint64_t lbs_sim_iteration(const struct LbsSim *sim);

// # Safety
// `sim` must be a live handle or null (which yields NaN).
double lbs_sim_total_mass(const struct LbsSim *sim);

// Writes the grid extent as `[nx, ny, nz]`.
//
// # Safety
// `sim` must be a live handle and `dims` point to three writable u32.
enum LbsStatus lbs_sim_dims(const struct LbsSim *sim, uint32_t *dims);

// Renders field `field_id` on the slice `axis`/`index` into `buf`
// (`cap` floats). With a null `buf` or a short `cap` only `shape` is
// filled and `LBS_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// `sim` must be a live handle, `shape` writable, and `buf` valid for
// `cap` floats when non-null.
enum LbsStatus lbs_sim_render(const struct LbsSim *sim,
                              uint16_t field_id,
                              uint8_t axis,
                              uint32_t index,
                              float *buf,
                              uint64_t cap,
                              struct LbsFrameShape *shape);

struct LbsDecoder *lbs_decoder_new(void);

// # Safety
// `d` must come from `lbs_decoder_new` and not have been freed.
void lbs_decoder_free(struct LbsDecoder *d);

// Appends received bytes.
//
// # Safety
// `d` must be a live handle and `bytes` valid for `len` bytes.
enum LbsStatus lbs_decoder_push(struct LbsDecoder *d, const uint8_t *bytes, size_t len);

// Takes the next complete message: writes its type and copies its
// payload (canonically re-encoded) into `buf`. Returns
// `LBS_STATUS_NEED_MORE` if no message is complete yet and
// `LBS_STATUS_PROTOCOL` once the stream is malformed. When `cap` is too
// small the message stays queued and the payload size is written.
//
// # Safety
// `d` must be a live handle, `msg_type` and `payload_len` writable, and
// `buf` valid for `cap` bytes when non-null.
enum LbsStatus lbs_decoder_next(struct LbsDecoder *d,
                                uint16_t *msg_type,
                                uint8_t *buf,
                                size_t cap,
                                size_t *payload_len);

// Starts a steering server that owns the simulation. `sim` is consumed
// even on failure. Pass null for a transport to disable it; port 0 picks
// a free port.
//
// # Safety
// `sim` must be a live handle, the binds null or NUL-terminated, and
// `out` writable.
enum LbsStatus lbs_server_start(struct LbsSim *sim,
                                const char *tcp_bind,
                                const char *ws_bind,
                                bool start_running,
                                struct LbsServer **out);

// Bound TCP port, or 0 when the transport is disabled.
//
// # Safety
// `s` must be a live handle or null.
uint16_t lbs_server_tcp_port(const struct LbsServer *s);

// Bound WebSocket port, or 0 when the transport is disabled.
//
// # Safety
// `s` must be a live handle or null.
uint16_t lbs_server_ws_port(const struct LbsServer *s);

// # Safety
// `s` must be a live handle or null (which yields 0).
uint64_t lbs_server_iteration(const struct LbsServer *s);

// Stops the server, closes every session and frees the handle along
// with the simulation it owned.
//
// # Safety
// `s` must be a live handle; it is invalid afterwards.
void lbs_server_shutdown(struct LbsServer *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LBSTEER_H */
