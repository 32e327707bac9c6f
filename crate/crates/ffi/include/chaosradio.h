#ifndef CHAOSRADIO_H
#define CHAOSRADIO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  CR_STATUS_INVALID_UTF8 = 2,
  CR_STATUS_CONFIG = 3,
  CR_STATUS_RUNTIME = 4,
  CR_STATUS_BUFFER_TOO_SMALL = 5,
  CR_STATUS_PANIC = 6,
} CrStatus;

/**
 * A validated experiment of one system.
 */
typedef struct CrExperiment CrExperiment;

/**
 * Bits counted and errors of one trial.
 */
typedef struct CrTrialOutcome {
  uint64_t bits_counted;
  uint64_t errors;
} CrTrialOutcome;

/**
 * One point of a BER sweep with its 95% Wilson interval.
 */
typedef struct CrBerPoint {
  double snr_db;
  double ebn0_db;
  uint64_t bits_counted;
  uint64_t errors;
  double ber;
  double ci_low;
  double ci_high;
} CrBerPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an experiment from configuration text and a system name
 * (`chaos_zero`, `chaos_past_isi`, `chaos_past_isi_mmse`, `bpsk`,
 * `bpsk_mmse`). An empty config string selects the defaults.
 *
 * # Safety
 * `config_text` and `system` must be valid NUL-terminated strings and `out`
 * a valid pointer. The handle written to `*out` must be released with
 * [`cr_experiment_free`].
 */
enum CrStatus cr_experiment_new(const char *config_text,
                                const char *system,
                                struct CrExperiment **out);

/**
 * Releases an experiment. Null is ignored.
 *
 * # Safety
 * `exp` must be null or a handle from [`cr_experiment_new`] not yet freed.
 */
void cr_experiment_free(struct CrExperiment *exp);

/**
 * Number of SNR points a sweep of `exp` produces (0 for null).
 *
 * # Safety
 * `exp` must be null or a live handle.
 */
size_t cr_experiment_num_points(const struct CrExperiment *exp);

/**
 * Runs one Monte Carlo trial at `snr_db` (may be `INFINITY`).
 *
 * # Safety
 * `exp` must be a live handle and `out` a valid pointer.
 */
enum CrStatus cr_experiment_run_trial(const struct CrExperiment *exp,
                                      double snr_db,
                                      uint64_t trial_seed,
                                      struct CrTrialOutcome *out);

/**
 * Runs the full BER sweep into `points`, which must hold
 * [`cr_experiment_num_points`] entries. `*written` receives the number of
 * points stored, or the required count on `BUFFER_TOO_SMALL`.
 *
 * # Safety
 * `exp` must be a live handle, `points` valid for `capacity` writes and
 * `written` a valid pointer.
 */
enum CrStatus cr_experiment_sweep(const struct CrExperiment *exp,
                                  struct CrBerPoint *points,
                                  size_t capacity,
                                  size_t *written);

/**
 * Copies the sampled transmit pulse of `exp` into `samples`. `*len`
 * receives the pulse length (also on `BUFFER_TOO_SMALL`) and
 * `*start_index` the sample-grid index of its first sample.
 *
 * # Safety
 * `exp` must be a live handle, `samples` valid for `capacity` writes (or
 * null when `capacity` is 0), `len` and `start_index` valid pointers.
 */
enum CrStatus cr_experiment_pulse(const struct CrExperiment *exp,
                                  double *samples,
                                  size_t capacity,
                                  size_t *len,
                                  int64_t *start_index);

/**
 * Copies the message of the last failure on this thread into `buf` as a
 * NUL-terminated string, truncating if needed. Returns the full message
 * length plus one, so a caller can size the buffer with a first call.
 *
 * # Safety
 * `buf` must be null or valid for `capacity` bytes.
 */
size_t cr_last_error_message(char *buf, size_t capacity);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cr_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAOSRADIO_H */
