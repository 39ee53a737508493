#ifndef MFMC_H
#define MFMC_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MfmcStatus {
  MFMC_STATUS_OK = 0,
  MFMC_STATUS_NULL_POINTER = 1,
  MFMC_STATUS_INVALID_ARGUMENT = 2,
  MFMC_STATUS_NUMERICAL = 3,
  MFMC_STATUS_CONFIG = 4,
  MFMC_STATUS_IO = 5,
  // A Rust panic was caught at the boundary.
  MFMC_STATUS_INTERNAL = 6,
} MfmcStatus;

typedef enum MfmcScheme {
  MFMC_SCHEME_RUSSIAN_ROULETTE = 0,
  MFMC_SCHEME_SINGLE_TERM = 1,
} MfmcScheme;

// ChaCha8 generator on a chosen stream.
typedef struct MfmcRng MfmcRng;

// Result of an experiment run.
typedef struct MfmcSummary MfmcSummary;

// Conjugate Gaussian toy sequence over a fixed dataset.
typedef struct MfmcToy MfmcToy;

// Geometric truncation distribution over fidelities `1..=k_max`.
typedef struct MfmcTruncation MfmcTruncation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *mfmc_version(void);

// Message of the last failed call on this thread, or NULL. The pointer stays
// valid until the next failing call on the same thread.
const char *mfmc_last_error(void);

// # Safety
// `out` must be valid for writing one pointer.
enum MfmcStatus mfmc_truncation_new(double gamma0, size_t k_max, struct MfmcTruncation **out);

// # Safety
// `h` must be NULL or a handle from [`mfmc_truncation_new`] not yet freed.
void mfmc_truncation_free(struct MfmcTruncation *h);

// `P(K = k)`.
//
// # Safety
// `h` must be a live truncation handle and `out` writable.
enum MfmcStatus mfmc_truncation_pmf(const struct MfmcTruncation *h, size_t k, double *out);

// `P(K >= k)`.
//
// # Safety
// `h` must be a live truncation handle and `out` writable.
enum MfmcStatus mfmc_truncation_survival(const struct MfmcTruncation *h, size_t k, double *out);

// Weight of increment `k` in an estimate truncated at `truncation`.
//
// # Safety
// `h` must be a live truncation handle and `out` writable.
enum MfmcStatus mfmc_truncation_weight(const struct MfmcTruncation *h,
                                       enum MfmcScheme scheme,
                                       size_t k,
                                       size_t truncation,
                                       double *out);

// Draws a truncation level.
//
// # Safety
// `h` and `rng` must be live handles and `out` writable.
enum MfmcStatus mfmc_truncation_sample(const struct MfmcTruncation *h,
                                       struct MfmcRng *rng,
                                       size_t *out);

// # Safety
// `out` must be valid for writing one pointer.
enum MfmcStatus mfmc_rng_new(uint64_t seed, uint64_t stream, struct MfmcRng **out);

// # Safety
// `h` must be NULL or a handle from [`mfmc_rng_new`] not yet freed.
void mfmc_rng_free(struct MfmcRng *h);

// Copies `len` observations into a new toy sequence.
//
// # Safety
// `data` must point to `len` readable doubles and `out` be writable.
enum MfmcStatus mfmc_toy_new(const double *data, size_t len, struct MfmcToy **out);

// # Safety
// `h` must be NULL or a handle from [`mfmc_toy_new`] not yet freed.
void mfmc_toy_free(struct MfmcToy *h);

// Log-likelihood at fidelity `k` (prior excluded).
//
// # Safety
// `h` must be a live toy handle and `out` writable.
enum MfmcStatus mfmc_toy_log_level(const struct MfmcToy *h, double theta, size_t k, double *out);

// Log-likelihood of the limiting model.
//
// # Safety
// `h` must be a live toy handle and `out` writable.
enum MfmcStatus mfmc_toy_log_limit(const struct MfmcToy *h, double theta, double *out);

// Unbiased estimate of the limiting likelihood truncated at `truncation`, as
// `sign * exp(log_abs)`, with the cost of the levels it evaluated.
//
// # Safety
// `toy` and `dist` must be live handles; the three out-pointers writable.
enum MfmcStatus mfmc_toy_estimate(const struct MfmcToy *toy,
                                  const struct MfmcTruncation *dist,
                                  double theta,
                                  size_t truncation,
                                  enum MfmcScheme scheme,
                                  double *out_log_abs,
                                  int8_t *out_sign,
                                  double *out_cost);

// Runs the experiment described by the TOML file at `config_path`, writing
// samples and `summary.json` under `out_dir`. `has_seed` selects whether
// `seed` overrides the file. `threads == 0` leaves parallelism uncapped.
//
// # Safety
// Both paths must be NUL-terminated strings and `out` writable.
enum MfmcStatus mfmc_run_config(const char *config_path,
                                const char *out_dir,
                                bool has_seed,
                                uint64_t seed,
                                size_t threads,
                                struct MfmcSummary **out);

// # Safety
// `h` must be NULL or a handle from [`mfmc_run_config`] not yet freed.
void mfmc_summary_free(struct MfmcSummary *h);

// The summary as JSON; owned by the handle.
//
// # Safety
// `h` must be a live summary handle.
const char *mfmc_summary_json(const struct MfmcSummary *h);

// Number of reported coordinates.
//
// # Safety
// `h` must be a live summary handle and `out` writable.
enum MfmcStatus mfmc_summary_dim(const struct MfmcSummary *h, size_t *out);

// Pooled sign-corrected posterior mean of coordinate `i`.
//
// # Safety
// `h` must be a live summary handle and `out` writable.
enum MfmcStatus mfmc_summary_pooled_mean(const struct MfmcSummary *h, size_t i, double *out);

// Pooled total ledger cost, mean fidelity and negative-sign fraction.
//
// # Safety
// `h` must be a live summary handle; each out-pointer may be NULL to skip it.
enum MfmcStatus mfmc_summary_totals(const struct MfmcSummary *h,
                                    double *total_cost,
                                    double *mean_k,
                                    double *negative_sign_fraction);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MFMC_H */
