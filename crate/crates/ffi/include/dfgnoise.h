#ifndef DFGNOISE_H
#define DFGNOISE_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DfgStatus {
  DFG_STATUS_OK = 0,
  DFG_STATUS_NULL_POINTER = 1,
  DFG_STATUS_INVALID_ARGUMENT = 2,
  DFG_STATUS_NO_MAXIMUM = 3,
  DFG_STATUS_INSUFFICIENT_DATA = 4,
  DFG_STATUS_RANK_DEFICIENT = 5,
  DFG_STATUS_NON_CONVERGENCE = 6,
  DFG_STATUS_FIT_FAILURE = 7,
  DFG_STATUS_MODEL_VIOLATION = 8,
  DFG_STATUS_IO = 9,
  DFG_STATUS_PANIC = 10,
} DfgStatus;

typedef enum DfgEfficiency {
  DFG_EFFICIENCY_INTERNAL = 0,
  DFG_EFFICIENCY_EXTERNAL = 1,
} DfgEfficiency;

/**
 * Opaque converter parameter set.
 */
typedef struct DfgConverterParams DfgConverterParams;

/**
 * Opaque fit result.
 */
typedef struct DfgFitResult DfgFitResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL after a
 * successful call. Valid until the next call on the same thread.
 */
const char *dfg_last_error_message(void);

/**
 * Library version, static storage.
 */
const char *dfg_version(void);

/**
 * Creates a parameter set. `alpha_n` is in Hz/(W cm) measured in
 * `bandwidth_ref_hz`.
 */
enum DfgStatus dfg_params_new(double length_cm,
                              double eta_max_int,
                              double eta_max_ext,
                              double eta_n,
                              double alpha_n,
                              double bandwidth_ref_hz,
                              struct DfgConverterParams **out_params);

/**
 * Parameter set of the measured 4 cm device.
 */
enum DfgStatus dfg_params_measured_device(struct DfgConverterParams **out_params);

/**
 * Releases a parameter set; NULL is ignored.
 */
void dfg_params_free(struct DfgConverterParams *params);

enum DfgStatus dfg_efficiency(const struct DfgConverterParams *params,
                              enum DfgEfficiency which,
                              double pump_w,
                              double *out_value);

enum DfgStatus dfg_dip_depth(const struct DfgConverterParams *params,
                             double pump_w,
                             double *out_value);

/**
 * Telecom noise rate at the waveguide output, Hz.
 */
enum DfgStatus dfg_telecom_noise_rate(const struct DfgConverterParams *params,
                                      double pump_w,
                                      double *out_value);

/**
 * Visible (up-converted) noise rate, Hz.
 */
enum DfgStatus dfg_visible_noise_rate(const struct DfgConverterParams *params,
                                      double pump_w,
                                      double *out_value);

/**
 * Pump power of maximum efficiency, W.
 */
enum DfgStatus dfg_peak_pump_power(const struct DfgConverterParams *params, double *out_value);

enum DfgStatus dfg_sfg_partner_wavelength(double lambda_pump_nm,
                                          double lambda_tele_nm,
                                          double *out_value);

/**
 * Noise photons per spectro-temporal mode, per W per cm.
 */
enum DfgStatus dfg_photons_per_mode(double alpha_n, double bandwidth_hz, double *out_value);

/**
 * Intrinsic width of a Gaussian line observed through a Gaussian filter.
 */
enum DfgStatus dfg_deconvolve_gaussian(double observed_fwhm, double filter_fwhm, double *out_value);

/**
 * Poisson draw of detected counts for `true_rate` Hz at the waveguide
 * output seen through total transmission `transmission`.
 */
enum DfgStatus dfg_simulate_counts(double true_rate,
                                   double transmission,
                                   double dark_rate,
                                   double integration_time,
                                   uint64_t seed,
                                   uint64_t *out_counts);

/**
 * Joint fit of internal and external efficiency sweeps with a shared
 * conversion parameter. Parameters: eta_max_int, eta_max_ext, eta_n.
 *
 * On non-convergence the best point is still returned in `out_fit`
 * together with `DFG_STATUS_NON_CONVERGENCE`.
 */
enum DfgStatus dfg_fit_efficiency(const double *pump_int,
                                  const double *eta_int,
                                  const double *sigma_int,
                                  size_t n_int,
                                  const double *pump_ext,
                                  const double *eta_ext,
                                  const double *sigma_ext,
                                  size_t n_ext,
                                  double length_cm,
                                  struct DfgFitResult **out_fit);

/**
 * Linear fit `rate = alpha_n * L * P` over the first `n_fit` points.
 */
enum DfgStatus dfg_fit_alpha_linear(const double *pump_w,
                                    const double *rate_hz,
                                    const double *sigma_hz,
                                    size_t n,
                                    size_t n_fit,
                                    double length_cm,
                                    struct DfgFitResult **out_fit);

void dfg_fit_result_free(struct DfgFitResult *fit);

/**
 * Number of fitted parameters, 0 for NULL.
 */
size_t dfg_fit_result_len(const struct DfgFitResult *fit);

/**
 * Name of parameter `index`, owned by the handle; NULL when out of range.
 */
const char *dfg_fit_result_name(const struct DfgFitResult *fit, size_t index);

/**
 * Value and 1-sigma uncertainty of parameter `index`.
 */
enum DfgStatus dfg_fit_result_parameter(const struct DfgFitResult *fit,
                                        size_t index,
                                        double *out_value,
                                        double *out_sigma);

/**
 * Covariance element `(row, col)`.
 */
enum DfgStatus dfg_fit_result_covariance(const struct DfgFitResult *fit,
                                         size_t row,
                                         size_t col,
                                         double *out_value);

enum DfgStatus dfg_fit_result_chi2_reduced(const struct DfgFitResult *fit, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DFGNOISE_H */
