#ifndef FRETWISE_H
#define FRETWISE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Value written to `out_frets` for a muted string.
#define FW_MUTED -1

typedef enum FwStatus {
  FW_STATUS_OK = 0,
  FW_STATUS_NULL_POINTER = 1,
  FW_STATUS_INVALID_UTF8 = 2,
  FW_STATUS_IO = 3,
  FW_STATUS_CORRUPT_MODEL = 4,
  FW_STATUS_VERSION_MISMATCH = 5,
  FW_STATUS_MALFORMED_LABEL = 6,
  FW_STATUS_MALFORMED_FINGERING = 7,
  FW_STATUS_MISSING_CONTEXT = 8,
  FW_STATUS_INVALID_ARGUMENT = 9,
  FW_STATUS_INTERNAL = 10,
} FwStatus;

typedef enum FwTopology {
  FW_TOPOLOGY_BASELINE = 0,
  FW_TOPOLOGY_FULL = 1,
} FwTopology;

// Opaque handle to a loaded model.
typedef struct FwModel FwModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *fw_version(void);

// Message of the last failure on this thread, or null. Valid until the
// next failing call on the same thread.
const char *fw_last_error_message(void);

// Loads a model file into `*out`.
//
// # Safety
// `path` must be a valid NUL-terminated string and `out` a valid pointer.
enum FwStatus fw_model_load(const char *path, struct FwModel **out);

// Releases a model handle; null is ignored.
//
// # Safety
// `model` must be null or a handle from [`fw_model_load`] not yet freed.
void fw_model_free(struct FwModel *model);

// Writes the model topology to `*out`.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum FwStatus fw_model_topology(const struct FwModel *model, enum FwTopology *out);

// Top-`k` suggestions for `label` as JSON
// `{"suggestions": [{fingering, score, playability, unplayable, pitch_f1, chord_change_ease?}]}`.
// `prev` may be null for the baseline model. The string written to `*out`
// must be released with [`fw_string_free`].
//
// # Safety
// `model` must be a live handle, `label` a valid string, `prev` null or a
// valid string, and `out` a valid pointer.
enum FwStatus fw_suggest_json(const struct FwModel *model,
                              const char *label,
                              const char *prev,
                              uint32_t k,
                              char **out);

// Releases a string returned by this library; null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void fw_string_free(char *s);

// Parses a fingering such as "x.0.2.2.1.0" into six frets, low E first;
// muted strings are written as [`FW_MUTED`].
//
// # Safety
// `fingering` must be a valid string and `out_frets` must point to 6 writable `int32_t`.
enum FwStatus fw_parse_fingering(const char *fingering, int32_t *out_frets);

// Pitch-class F1 between a fingering and a chord label.
//
// # Safety
// `fingering` and `label` must be valid strings and `out` a valid pointer.
enum FwStatus fw_pitch_f1(const char *fingering, const char *label, double *out);

// Anatomical playability score in [0, 1].
//
// # Safety
// `fingering` must be a valid string and `out` a valid pointer.
enum FwStatus fw_anatomical_score(const char *fingering, double *out);

// Ease of changing from one fingering to another, in (0, 1].
//
// # Safety
// `from` and `to` must be valid strings and `out` a valid pointer.
enum FwStatus fw_chord_change_ease(const char *from, const char *to, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRETWISE_H */
