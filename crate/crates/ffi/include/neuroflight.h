#ifndef NEUROFLIGHT_H
#define NEUROFLIGHT_H

#pragma once

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Number of values written by [`nf_extract_model_features`].
 */
#define NF_MODEL_FEATURES 10

/**
 * Trials in one session.
 */
#define NF_TRIALS_PER_SESSION 5

/**
 * Result of every fallible call.
 */
typedef enum NfStatus {
  NF_STATUS_OK = 0,
  NF_STATUS_NULL_POINTER = 1,
  NF_STATUS_INVALID_ARGUMENT = 2,
  NF_STATUS_INVALID_LEVEL = 3,
  NF_STATUS_PROTOCOL_VIOLATION = 4,
  NF_STATUS_IO = 5,
  NF_STATUS_FORMAT = 6,
  NF_STATUS_SIGNAL = 7,
  NF_STATUS_CLASSIFIER = 8,
  NF_STATUS_UNDEFINED = 9,
  NF_STATUS_PANIC = 99,
} NfStatus;

typedef enum NfLabel {
  NF_LABEL_LOW = 0,
  NF_LABEL_HIGH = 1,
} NfLabel;

typedef enum NfCondition {
  NF_CONDITION_FIXED_ORDER = 0,
  NF_CONDITION_ADAPTIVE = 1,
} NfCondition;

typedef enum NfTask {
  NF_TASK_DECELERATION = 0,
  NF_TASK_MEDIUM_TURN = 1,
} NfTask;

typedef enum NfPhase {
  NF_PHASE_IDLE = 0,
  NF_PHASE_TRIAL_RUNNING = 1,
  NF_PHASE_CLASSIFYING = 2,
  NF_PHASE_AWAITING_NEXT = 3,
  NF_PHASE_DONE = 4,
} NfPhase;

/**
 * A multichannel EEG epoch on the standard 32-channel montage.
 */
typedef struct NfEpoch NfEpoch;

/**
 * A trained stacking classifier.
 */
typedef struct NfModel NfModel;

/**
 * A five-trial session state machine.
 */
typedef struct NfSession NfSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *nf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *nf_version(void);

/**
 * Level for the trial after one at `current` classified as `label`.
 *
 * # Safety
 * `out` must point to writable memory for one byte.
 */
enum NfStatus nf_next_difficulty(uint8_t current, enum NfLabel label, uint8_t *out);

/**
 * Difficulty sequence of a session given the label of each trial.
 *
 * # Safety
 * `labels` must point to `n` readable labels and `out_levels` to `n`
 * writable bytes; `n` must equal `NF_TRIALS_PER_SESSION`.
 */
enum NfStatus nf_run_condition(enum NfCondition condition,
                               const enum NfLabel *labels,
                               size_t n,
                               uint8_t *out_levels);

/**
 * `beta / (alpha + theta)` for band powers in µV².
 *
 * # Safety
 * `out` must be writable.
 */
enum NfStatus nf_engagement_index(double theta, double alpha, double beta, double *out);

/**
 * Fisher z comparison of two independent correlations.
 *
 * # Safety
 * `out_z` and `out_p` must be writable.
 */
enum NfStatus nf_fisher_z_compare(double r1,
                                  size_t n1,
                                  double r2,
                                  size_t n2,
                                  double *out_z,
                                  double *out_p);

/**
 * Builds an epoch from channel-major samples in µV on the standard montage.
 *
 * # Safety
 * `samples` must point to `n_channels * n_samples` readable doubles and
 * `out` must be writable.
 */
enum NfStatus nf_epoch_new(const double *samples,
                           size_t n_channels,
                           size_t n_samples,
                           double sample_rate,
                           struct NfEpoch **out);

/**
 * Reads an epoch file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum NfStatus nf_epoch_load(const char *path, struct NfEpoch **out);

/**
 * # Safety
 * `epoch` must be NULL or a handle from this library not yet freed.
 */
void nf_epoch_free(struct NfEpoch *epoch);

/**
 * Writes the ten model features of an epoch into `out`.
 *
 * # Safety
 * `epoch` must be a live handle and `out` must have room for
 * `NF_MODEL_FEATURES` doubles.
 */
enum NfStatus nf_extract_model_features(const struct NfEpoch *epoch,
                                        bool remove_artifacts,
                                        double *out);

/**
 * Loads a model written by `neuroflight train --model-out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum NfStatus nf_model_load(const char *path, struct NfModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from this library not yet freed.
 */
void nf_model_free(struct NfModel *model);

/**
 * Classifies one feature row of length `n`.
 *
 * # Safety
 * `model` must be live, `features` must hold `n` doubles and `out` be writable.
 */
enum NfStatus nf_model_predict(const struct NfModel *model,
                               const double *features,
                               size_t n,
                               enum NfLabel *out);

/**
 * Runs the full pipeline on an epoch and classifies it.
 *
 * # Safety
 * `model` and `epoch` must be live handles and `out` writable.
 */
enum NfStatus nf_model_classify_epoch(const struct NfModel *model,
                                      const struct NfEpoch *epoch,
                                      enum NfLabel *out);

/**
 * # Safety
 * `out` must be writable.
 */
enum NfStatus nf_session_new(enum NfCondition condition, enum NfTask task, struct NfSession **out);

/**
 * # Safety
 * `session` must be NULL or a handle from this library not yet freed.
 */
void nf_session_free(struct NfSession *session);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum NfStatus nf_session_start_trial(struct NfSession *session);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum NfStatus nf_session_epoch_captured(struct NfSession *session);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum NfStatus nf_session_label(struct NfSession *session, enum NfLabel label);

/**
 * Replaces the level of the next trial.
 *
 * # Safety
 * `session` must be a live handle.
 */
enum NfStatus nf_session_override(struct NfSession *session, uint8_t level_value);

/**
 * # Safety
 * `session` must be a live handle.
 */
enum NfStatus nf_session_abort(struct NfSession *session);

/**
 * # Safety
 * `session` must be a live handle; `phase` and `next_level` must be writable.
 */
enum NfStatus nf_session_status(const struct NfSession *session,
                                enum NfPhase *phase,
                                uint8_t *next_level);

/**
 * Copies the levels of all started trials into `out` (capacity `cap`) and
 * stores their count in `out_len`.
 *
 * # Safety
 * `session` must be live, `out` must have `cap` writable bytes and
 * `out_len` must be writable.
 */
enum NfStatus nf_session_trace(const struct NfSession *session,
                               uint8_t *out,
                               size_t cap,
                               size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEUROFLIGHT_H */
