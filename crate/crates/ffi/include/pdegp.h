/* C interface to the pdegp library. Generated by cbindgen. */

#ifndef PDEGP_H
#define PDEGP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes mirroring the library's error classes.
 */
typedef enum PdegpStatus {
  PdegpStatus_Ok = 0,
  PdegpStatus_NullPointer = 1,
  PdegpStatus_InvalidInput = 2,
  PdegpStatus_InvalidConfig = 3,
  PdegpStatus_IllConditioned = 4,
  PdegpStatus_ParseError = 5,
  PdegpStatus_ValidationError = 6,
  PdegpStatus_AdaptationFailure = 7,
  PdegpStatus_IoError = 8,
  PdegpStatus_Panic = 9,
} PdegpStatus;

/**
 * Which channels a generated dataset contains.
 */
typedef enum PdegpChannels {
  PdegpChannels_Both = 0,
  PdegpChannels_YOnly = 1,
  PdegpChannels_FOnly = 2,
} PdegpChannels;

/**
 * Prediction channel selector.
 */
typedef enum PdegpChannel {
  PdegpChannel_Y = 0,
  PdegpChannel_F = 1,
} PdegpChannel;

/**
 * Opaque dataset handle.
 */
typedef struct PdegpDataset PdegpDataset;

/**
 * Opaque fit-result handle: posterior summary plus the raw chain.
 */
typedef struct PdegpFitResult PdegpFitResult;

/**
 * Options for [`pdegp_dataset_generate`]: `n_locations` points uniform over
 * the rectangle, one row per selected channel per location, noise standard
 * deviation `sigma0`.
 */
typedef struct PdegpSimulationOptions {
  uintptr_t n_locations;
  double x_min;
  double x_max;
  double t_min;
  double t_max;
  double sigma0;
  uint64_t seed;
  enum PdegpChannels channels;
} PdegpSimulationOptions;

/**
 * Options for [`pdegp_fit`]. `sampled[i] != 0` marks parameter `i` as
 * inferred; frozen parameters stay at `init[i]`. Priors are flat on the
 * log scale.
 */
typedef struct PdegpFitOptions {
  uintptr_t n_warmup;
  uintptr_t n_samples;
  uintptr_t leapfrog_steps;
  double step_size;
  double target_accept;
  uint64_t seed;
  uint8_t sampled[6];
  double init[6];
} PdegpFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pdegp_last_error_message(void);

/**
 * Name of parameter `index` (0..6) in the canonical order, or NULL.
 */
const char *pdegp_param_name(uintptr_t index);

/**
 * Load a dataset CSV (header `x,t,channel,value,noise_variance`).
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum PdegpStatus pdegp_dataset_load(const char *path, struct PdegpDataset **out);

/**
 * Like [`pdegp_dataset_load`] for files without a noise column; every row
 * gets `noise_variance`.
 *
 * # Safety
 * Same contract as [`pdegp_dataset_load`].
 */
enum PdegpStatus pdegp_dataset_load_with_noise(const char *path,
                                               double noise_variance,
                                               struct PdegpDataset **out);

/**
 * Generate the trigonometric simulation dataset.
 *
 * # Safety
 * `options` and `out` must be valid pointers.
 */
enum PdegpStatus pdegp_dataset_generate(const struct PdegpSimulationOptions *options,
                                        struct PdegpDataset **out);

/**
 * Write a dataset back to CSV.
 *
 * # Safety
 * `ds` must be a live handle; `path` a NUL-terminated string.
 */
enum PdegpStatus pdegp_dataset_save(const struct PdegpDataset *ds, const char *path);

/**
 * Number of rows, or 0 for NULL.
 *
 * # Safety
 * `ds` must be NULL or a live handle.
 */
uintptr_t pdegp_dataset_len(const struct PdegpDataset *ds);

/**
 * Destroy a dataset handle.
 *
 * # Safety
 * `ds` must be NULL or a handle not freed before.
 */
void pdegp_dataset_free(struct PdegpDataset *ds);

/**
 * Log marginal likelihood of the dataset at the given parameters
 * (length-6 array).
 *
 * # Safety
 * `ds` live handle, `params` length-6 array, `out` valid pointer.
 */
enum PdegpStatus pdegp_log_marginal_likelihood(const struct PdegpDataset *ds,
                                               const double *params,
                                               double *out);

/**
 * Gradient of the log marginal likelihood over the six parameters.
 *
 * # Safety
 * `out_grad` must point to 6 writable doubles.
 */
enum PdegpStatus pdegp_grad_log_marginal_likelihood(const struct PdegpDataset *ds,
                                                    const double *params,
                                                    double *out_grad);

/**
 * Fill `out` with the default fit options (1000 warmup, 7000 samples,
 * L = 20, step 0.1, target acceptance 0.8, all parameters sampled from 1).
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PdegpStatus pdegp_fit_options_default(struct PdegpFitOptions *out);

/**
 * Run the HMC sampler on a dataset. Flat-on-log priors; frozen parameters
 * stay at their `init` values.
 *
 * # Safety
 * `ds` live handle, `options` valid, `out` valid pointer.
 */
enum PdegpStatus pdegp_fit(const struct PdegpDataset *ds,
                           const struct PdegpFitOptions *options,
                           struct PdegpFitResult **out);

/**
 * Posterior mean of parameter `index` (NaN for a bad index or NULL).
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double pdegp_fit_result_mean(const struct PdegpFitResult *r, uintptr_t index);

/**
 * Posterior standard deviation of parameter `index`.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double pdegp_fit_result_sd(const struct PdegpFitResult *r, uintptr_t index);

/**
 * Effective sample size of parameter `index`.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double pdegp_fit_result_ess(const struct PdegpFitResult *r, uintptr_t index);

/**
 * Posterior correlation between parameters `i` and `j`.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double pdegp_fit_result_correlation(const struct PdegpFitResult *r, uintptr_t i, uintptr_t j);

/**
 * Acceptance rate of the chain.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
double pdegp_fit_result_acceptance_rate(const struct PdegpFitResult *r);

/**
 * Number of divergent trajectories after warmup.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
uintptr_t pdegp_fit_result_divergences(const struct PdegpFitResult *r);

/**
 * Number of post-warmup draws.
 *
 * # Safety
 * `r` must be NULL or a live handle.
 */
uintptr_t pdegp_fit_result_len(const struct PdegpFitResult *r);

/**
 * Copy up to `len` posterior draws of parameter `param_index` into `out`.
 * Returns the number of values written.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
uintptr_t pdegp_fit_result_draws(const struct PdegpFitResult *r,
                                 uintptr_t param_index,
                                 double *out,
                                 uintptr_t len);

/**
 * Destroy a fit-result handle.
 *
 * # Safety
 * `r` must be NULL or a handle not freed before.
 */
void pdegp_fit_result_free(struct PdegpFitResult *r);

/**
 * Posterior mean and variance of one channel on the `n_x` x `n_t` grid
 * spanned by `xs` and `ts`. Output buffers are row-major `n_x * n_t`.
 * When the dataset holds only F rows and `channel` is Y, this is the
 * probabilistic PDE solve.
 *
 * # Safety
 * `xs`/`ts` must point to `n_x`/`n_t` doubles; `out_mean` and
 * `out_variance` to `n_x * n_t` writable doubles each.
 */
enum PdegpStatus pdegp_predict(const struct PdegpDataset *ds,
                               const double *params,
                               enum PdegpChannel channel,
                               const double *xs,
                               uintptr_t n_x,
                               const double *ts,
                               uintptr_t n_t,
                               double *out_mean,
                               double *out_variance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDEGP_H */
