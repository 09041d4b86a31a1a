#ifndef HJREACT_H
#define HJREACT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  HJ_STATUS_OK = 0,
  HJ_STATUS_NULL_POINTER = 1,
  HJ_STATUS_INVALID_PARAMETER = 2,
  HJ_STATUS_NON_CONVERGENCE = 3,
  HJ_STATUS_TOPOLOGY = 4,
  HJ_STATUS_NUMERICAL = 5,
  HJ_STATUS_IO = 6,
  HJ_STATUS_BUFFER_TOO_SMALL = 7,
  HJ_STATUS_OUT_OF_RANGE = 8,
  HJ_STATUS_PANIC = 9,
} HjStatus;

/**
 * Surface model handle.
 */
typedef struct HjModel HjModel;

/**
 * Reaction path handle.
 */
typedef struct HjPath HjPath;

/**
 * Wave-packet propagator handle.
 */
typedef struct HjPropagator HjPropagator;

typedef struct {
  double x;
  double y;
  double energy;
  /**
   * 0 minimum, 1 saddle, 2 other.
   */
  int32_t kind;
  double lambda1;
  double lambda2;
} HjStationaryPoint;

typedef struct {
  double s;
  double x;
  double y;
  double energy;
} HjPathPoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, or 0 if none.
 */
uintptr_t hj_last_error(char *buf, uintptr_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hj_version(void);

/**
 * Müller-Brown surface with energies multiplied by `energy_scale`
 * (1e-3 gives the standard scaled surface).
 */
HjStatus hj_model_new(double energy_scale, HjModel **out);

void hj_model_free(HjModel *model);

HjStatus hj_model_energy(const HjModel *model, double x, double y, double *out);

HjStatus hj_model_gradient(const HjModel *model,
                           double x,
                           double y,
                           double *out_gx,
                           double *out_gy);

/**
 * Stationary points from the default seed grid. Writes up to `cap` points
 * into `out` and the number found into `out_len`; returns
 * `HJ_STATUS_BUFFER_TOO_SMALL` if `cap` is insufficient.
 */
HjStatus hj_model_stationary_points(const HjModel *model,
                                    HjStationaryPoint *out,
                                    uintptr_t cap,
                                    uintptr_t *out_len);

/**
 * Minimum-energy path from the reactant to the product minimum.
 */
HjStatus hj_path_new(const HjModel *model, HjPath **out);

void hj_path_free(HjPath *path);

HjStatus hj_path_len(const HjPath *path, uintptr_t *out);

HjStatus hj_path_point(const HjPath *path, uintptr_t index, HjPathPoint *out);

/**
 * Gaussian packet of variance `sigma_sq` per axis at `(x0, y0)` with
 * momentum `(-p0, p0)`, on the standard box with `nx x ny` points.
 */
HjStatus hj_propagator_new(const HjModel *model,
                           uintptr_t nx,
                           uintptr_t ny,
                           double dt,
                           double x0,
                           double y0,
                           double sigma_sq,
                           double p0,
                           HjPropagator **out);

void hj_propagator_free(HjPropagator *prop);

HjStatus hj_propagator_step(HjPropagator *prop, uintptr_t steps);

HjStatus hj_propagator_time(const HjPropagator *prop, double *out);

HjStatus hj_propagator_norm(const HjPropagator *prop, double *out);

/**
 * Probability in the products region above the default frontier line.
 */
HjStatus hj_propagator_restricted_norm(const HjPropagator *prop, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HJREACT_H */
