#ifndef RSMA_FFI_H
#define RSMA_FFI_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RsmaStatus {
  RSMA_STATUS_OK = 0,
  RSMA_STATUS_NULL_POINTER = 1,
  RSMA_STATUS_INVALID_ARGUMENT = 2,
  RSMA_STATUS_DEGENERATE = 3,
  RSMA_STATUS_INTRACTABLE = 4,
  RSMA_STATUS_INFEASIBLE_NULLING = 5,
  RSMA_STATUS_DIMENSION = 6,
  RSMA_STATUS_UNSUPPORTED = 7,
  RSMA_STATUS_IO = 8,
  RSMA_STATUS_PANIC = 9,
} RsmaStatus;

typedef enum RsmaMethod {
  RSMA_METHOD_APPROX = 0,
  RSMA_METHOD_EXACT = 1,
} RsmaMethod;

typedef enum RsmaReceiver {
  RSMA_RECEIVER_SIC = 0,
  RSMA_RECEIVER_SIC_FREE = 1,
} RsmaReceiver;

typedef enum RsmaObjective {
  RSMA_OBJECTIVE_WSR = 0,
  RSMA_OBJECTIVE_MMF = 1,
} RsmaObjective;

/**
 * User channels, `k` vectors of length `n_t`.
 */
typedef struct RsmaChannels RsmaChannels;

typedef struct RsmaDictionary RsmaDictionary;

typedef struct RsmaResult RsmaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *rsma_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated and
 * NUL-terminated) and returns the full message length without the NUL.
 */
size_t rsma_last_error_message(char *buf, size_t len);

/**
 * Builds channels from `k * n_t` interleaved complex entries, user-major.
 */
enum RsmaStatus rsma_channels_new(size_t n_t,
                                  size_t k,
                                  const double *entries,
                                  struct RsmaChannels **out);

/**
 * Draws Rician channels for a `n_y x n_z` half-wavelength array (`n_z = 1`
 * gives a linear array). Angles are in radians, Rician factors in dB.
 */
enum RsmaStatus rsma_channels_sample(size_t n_y,
                                     size_t n_z,
                                     size_t k,
                                     const double *theta_az,
                                     const double *theta_el,
                                     const double *kappa_db,
                                     uint64_t seed,
                                     uint64_t stream,
                                     struct RsmaChannels **out);

/**
 * Copies the channels into `entries` (`2 * n_t * k` doubles, user-major).
 */
enum RsmaStatus rsma_channels_get(const struct RsmaChannels *channels, double *entries, size_t len);

void rsma_channels_free(struct RsmaChannels *channels);

/**
 * Built-in mode dictionary for `k` users and `r_max_bits`.
 */
enum RsmaStatus rsma_dictionary_new(size_t k, uint32_t r_max_bits, struct RsmaDictionary **out);

/**
 * Dictionary from JSON text.
 */
enum RsmaStatus rsma_dictionary_from_json(const char *json, struct RsmaDictionary **out);

enum RsmaStatus rsma_dictionary_len(const struct RsmaDictionary *dict, size_t *out);

/**
 * Number of precoder columns of mode `mode` (zero-based) for the
 * dictionary's user count.
 */
enum RsmaStatus rsma_dictionary_streams(const struct RsmaDictionary *dict,
                                        size_t mode,
                                        size_t *out);

void rsma_dictionary_free(struct RsmaDictionary *dict);

/**
 * Per-user rates of a precoder. `precoder` holds `2 * n_t * n_streams`
 * doubles, column-major. The three outputs take `k` doubles each:
 * common rate, SIC private rate and SIC-free private rate, clamped.
 */
enum RsmaStatus rsma_rates(const struct RsmaChannels *channels,
                           const struct RsmaDictionary *dict,
                           size_t mode,
                           const double *precoder,
                           double sigma2,
                           enum RsmaMethod method,
                           size_t mc_samples,
                           uint64_t mc_seed,
                           double *r_c,
                           double *r_p_sic,
                           double *r_p_sicfree);

/**
 * Max-min split of the common rate. Writes `k` shares to `c` and the
 * resulting minimum total rate to `min_rate`.
 */
enum RsmaStatus rsma_mmf_allocation(double r_c,
                                    const double *r_p,
                                    size_t k,
                                    double *c,
                                    double *min_rate);

/**
 * Optimizes the precoder of one mode with default ascent settings, power
 * budget `p_t` and restart seed `seed`. `weights` (`k` doubles) is read
 * for WSR only and may be null for equal weights.
 */
enum RsmaStatus rsma_optimize(const struct RsmaChannels *channels,
                              const struct RsmaDictionary *dict,
                              size_t mode,
                              enum RsmaReceiver receiver,
                              enum RsmaObjective objective,
                              const double *weights,
                              double p_t,
                              double sigma2,
                              uint64_t seed,
                              struct RsmaResult **out);

/**
 * Final objective, iteration count and convergence flag. Any output
 * pointer may be null.
 */
enum RsmaStatus rsma_result_summary(const struct RsmaResult *result,
                                    double *objective,
                                    size_t *iterations,
                                    bool *converged,
                                    double *common_power_ratio);

/**
 * Precoder shape; pass null buffers to query it.
 */
enum RsmaStatus rsma_result_precoder(const struct RsmaResult *result,
                                     double *entries,
                                     size_t len,
                                     size_t *rows,
                                     size_t *cols);

/**
 * Per-user total rates (`k` doubles) after the common-rate split.
 */
enum RsmaStatus rsma_result_user_rates(const struct RsmaResult *result, double *rates, size_t k);

void rsma_result_free(struct RsmaResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSMA_FFI_H */
