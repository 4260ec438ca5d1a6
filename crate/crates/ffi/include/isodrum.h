#ifndef ISODRUM_H
#define ISODRUM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IsodrumStatus {
  ISODRUM_STATUS_OK = 0,
  ISODRUM_STATUS_NULL_POINTER = 1,
  ISODRUM_STATUS_INVALID_UTF8 = 2,
  ISODRUM_STATUS_CONFIG = 3,
  ISODRUM_STATUS_NUMERICAL = 4,
  ISODRUM_STATUS_IO = 5,
  ISODRUM_STATUS_OUT_OF_RANGE = 6,
  ISODRUM_STATUS_BUFFER_TOO_SMALL = 7,
  ISODRUM_STATUS_PANIC = 8,
} IsodrumStatus;

// Parsed experiment configuration.
typedef struct IsodrumConfig IsodrumConfig;

// Eigenvalues and residual norms of one solve.
typedef struct IsodrumSpectrum IsodrumSpectrum;

// Summary of the isospectrality check on the pair.
typedef struct IsodrumCompareSummary {
  double intertwining_residual;
  bool exact;
  double max_rel_diff;
  double max_abs_diff;
} IsodrumCompareSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *isodrum_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *isodrum_version(void);

// Parses a config in key = value or JSON form.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
enum IsodrumStatus isodrum_config_parse(const char *text, struct IsodrumConfig **out);

// # Safety
// `cfg` must come from [`isodrum_config_parse`] and not be used afterwards.
void isodrum_config_free(struct IsodrumConfig *cfg);

// Number of domains (1, or 2 for the pair) and grids in the config.
//
// # Safety
// `cfg` must be a live handle; the out pointers may be null.
enum IsodrumStatus isodrum_config_counts(const struct IsodrumConfig *cfg,
                                         size_t *domains,
                                         size_t *grids);

// Lowest `solver.k` eigenvalues of domain `domain` on grid `grid`
// (indices into the config's lists).
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum IsodrumStatus isodrum_solve(const struct IsodrumConfig *cfg,
                                 size_t domain,
                                 size_t grid,
                                 struct IsodrumSpectrum **out);

// # Safety
// `s` must come from [`isodrum_solve`] and not be used afterwards.
void isodrum_spectrum_free(struct IsodrumSpectrum *s);

// Number of eigenvalues held by `s`, or 0 for a null handle.
//
// # Safety
// `s` must be a live handle or null.
size_t isodrum_spectrum_len(const struct IsodrumSpectrum *s);

// Copies the eigenvalues, ascending, into `buf` of capacity `cap`.
// `written` receives the required count even when `cap` is too small.
//
// # Safety
// `buf` must hold `cap` doubles; `written` may be null.
enum IsodrumStatus isodrum_spectrum_eigenvalues(const struct IsodrumSpectrum *s,
                                                double *buf,
                                                size_t cap,
                                                size_t *written);

// Copies the residual norms `‖Av - λv‖`, as [`isodrum_spectrum_eigenvalues`].
//
// # Safety
// As [`isodrum_spectrum_eigenvalues`].
enum IsodrumStatus isodrum_spectrum_residuals(const struct IsodrumSpectrum *s,
                                              double *buf,
                                              size_t cap,
                                              size_t *written);

// Transplantation check and spectrum comparison; needs `domain = pair`.
// Values are the worst over the config's grids.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
enum IsodrumStatus isodrum_compare(const struct IsodrumConfig *cfg,
                                   struct IsodrumCompareSummary *out);

// Richardson extrapolation of `n` values `v` at spacings `h` in powers of
// `h^order`.
//
// # Safety
// `h` and `v` must hold `n` doubles; `limit` and `stability` must be valid
// pointers (`stability` may be null).
enum IsodrumStatus isodrum_richardson(const double *h,
                                      const double *v,
                                      size_t n,
                                      double order,
                                      double *limit,
                                      double *stability);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISODRUM_H */
