#ifndef VISC_NONLOCAL_H
#define VISC_NONLOCAL_H

/* Generated by cbindgen from the visc-nonlocal-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/* Opaque handles; created and freed by this library. */
typedef struct VnKernel VnKernel;
typedef struct VnGlue VnGlue;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum {
  VN_OK = 0,
  VN_ERR_INVALID_ARGUMENT = 1,
  VN_ERR_DIVERGENT_MOMENT = 2,
  VN_ERR_UNSUPPORTED_DIMENSION = 3,
  VN_ERR_NOT_SMOOTH = 4,
  VN_ERR_SCENARIO = 5,
  VN_ERR_COHERENCE = 6,
  VN_ERR_IO = 7,
  VN_ERR_INTERNAL = 8,
} VnStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message on this thread; empty string when none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *vn_last_error_message(void);

/**
 * Compound-Poisson box kernel: q = intensity on |z| <= cutoff.
 */
VnStatus vn_kernel_new_box(uintptr_t dim, double intensity, double cutoff, VnKernel **out);

/**
 * Truncated alpha-stable kernel: q = |z|^{-dim-alpha} on 0 < |z| <= cutoff.
 */
VnStatus vn_kernel_new_truncated_stable(uintptr_t dim, double alpha, double cutoff, VnKernel **out);

/**
 * Tempered stable kernel: q = e^{-lambda |z|} |z|^{-dim-alpha}.
 */
VnStatus vn_kernel_new_tempered_stable(uintptr_t dim, double alpha, double lambda, VnKernel **out);

/**
 * Gaussian-tail kernel: q = e^{-lambda |z|^2}.
 */
VnStatus vn_kernel_new_gaussian_tail(uintptr_t dim, double lambda, VnKernel **out);

/**
 * The zero kernel.
 */
VnStatus vn_kernel_new_zero(uintptr_t dim, VnKernel **out);

/**
 * Frees a kernel handle; NULL is a no-op.
 *
 * # Safety
 * `kernel` must have been returned by one of the `vn_kernel_new_*`
 * constructors and not freed before.
 */
void vn_kernel_free(VnKernel *kernel);

/**
 * Admissibility check: writes the near second moment, tail mass and the
 * quadrature error estimate. A divergent kernel returns
 * `VN_ERR_DIVERGENT_MOMENT` and leaves the outputs untouched.
 *
 * # Safety
 * `kernel` must be a live handle; the out pointers must be writable.
 */
VnStatus vn_kernel_verify(const VnKernel *kernel,
                          double tolerance,
                          double *near_second_moment,
                          double *tail_mass,
                          double *error_estimate);

/**
 * Small-ball quadratic moment M(eps): writes dim*dim row-major entries.
 *
 * # Safety
 * `kernel` must be a live handle; `out_matrix` must point to at least
 * dim*dim writable doubles.
 */
VnStatus vn_kernel_small_ball_moment(const VnKernel *kernel, double eps, double *out_matrix);

/**
 * Builds the C2 glue spline for lambda < 0, s > 0.
 */
VnStatus vn_glue_new(double lambda, double s, VnGlue **out);

/**
 * Frees a glue handle; NULL is a no-op.
 *
 * # Safety
 * `glue` must have been returned by `vn_glue_new` and not freed before.
 */
void vn_glue_free(VnGlue *glue);

/**
 * Evaluates the glue spline: value and first two derivatives at x in
 * [-s, s]; outside the domain returns `VN_ERR_INVALID_ARGUMENT`.
 *
 * # Safety
 * `glue` must be a live handle; the out pointers must be writable.
 */
VnStatus vn_glue_eval(const VnGlue *glue, double x, double *value, double *first, double *second);

/**
 * Runs one definitional check over the scenario's point grid and writes
 * report.json into `out_dir`. `definition` is one of
 * "A" | "Aprime" | "B" | "Bprime" | "C"; `mode` is "sub", "super", or NULL
 * for the scenario's own mode.
 *
 * # Safety
 * The string arguments must be NUL-terminated (or NULL where allowed).
 */
VnStatus vn_run_check(const char *scenario_path,
                      const char *definition,
                      const char *mode,
                      const char *out_dir);

/**
 * Runs the five-definition equivalence suite, writing report.json,
 * study.csv and plotdata.csv into `out_dir`. Coherence or ordering
 * failures return `VN_ERR_COHERENCE` (outputs are still written).
 *
 * # Safety
 * The string arguments must be NUL-terminated.
 */
VnStatus vn_run_equivalence_suite(const char *scenario_path, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VISC_NONLOCAL_H */
