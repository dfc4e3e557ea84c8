#ifndef QDRAP_H
#define QDRAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QdrapStatus {
  QDRAP_STATUS_OK = 0,
  QDRAP_STATUS_NULL_POINTER = 1,
  QDRAP_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The integrator failed or the state left the physical domain.
   */
  QDRAP_STATUS_NUMERICAL = 3,
  /**
   * The output buffer is too short; nothing was written.
   */
  QDRAP_STATUS_BUFFER_TOO_SMALL = 4,
  QDRAP_STATUS_PANIC = 5,
} QdrapStatus;

typedef enum QdrapShape {
  QDRAP_SHAPE_SECH = 0,
  QDRAP_SHAPE_GAUSSIAN = 1,
} QdrapShape;

/**
 * Pulse parameters.
 */
typedef struct QdrapPulse QdrapPulse;

/**
 * Quantum-dot parameters: radiative decay, pure dephasing and phonon bath.
 */
typedef struct QdrapSystem QdrapSystem;

/**
 * Result of a master-equation run.
 */
typedef struct QdrapTrajectory QdrapTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL,
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t qdrap_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qdrap_version(void);

/**
 * # Safety
 * `out_pulse` must be null or valid for a pointer write.
 */
enum QdrapStatus qdrap_pulse_new(enum QdrapShape shape,
                                 double fwhm_ps,
                                 double area_pi,
                                 double gdd_ps2,
                                 struct QdrapPulse **out_pulse);

/**
 * # Safety
 * `pulse` must be null or a handle from [`qdrap_pulse_new`] not yet freed.
 */
void qdrap_pulse_free(struct QdrapPulse *pulse);

/**
 * Quantum dot without phonons. Add a bath with
 * [`qdrap_system_set_phonons`].
 *
 * # Safety
 * `out_system` must be null or valid for a pointer write.
 */
enum QdrapStatus qdrap_system_new(double radiative_rate_per_ps,
                                  double pure_dephasing_per_ps,
                                  struct QdrapSystem **out_system);

/**
 * # Safety
 * `system` must be a live handle from [`qdrap_system_new`].
 */
enum QdrapStatus qdrap_system_set_phonons(struct QdrapSystem *system,
                                          double alpha_ps2,
                                          double cutoff_radps,
                                          double temperature_k);

/**
 * # Safety
 * `system` must be null or a handle from [`qdrap_system_new`] not yet freed.
 */
void qdrap_system_free(struct QdrapSystem *system);

/**
 * Integrate the master equation from the ground state across the pulse.
 *
 * # Safety
 * `pulse` and `system` must be live handles; `out_trajectory` must be
 * valid for a pointer write.
 */
enum QdrapStatus qdrap_evolve(const struct QdrapPulse *pulse,
                              const struct QdrapSystem *system,
                              double tolerance,
                              struct QdrapTrajectory **out_trajectory);

/**
 * # Safety
 * `trajectory` must be null or a handle from [`qdrap_evolve`] not yet freed.
 */
void qdrap_trajectory_free(struct QdrapTrajectory *trajectory);

/**
 * Number of time samples, 0 for a null handle.
 *
 * # Safety
 * `trajectory` must be null or a live handle.
 */
size_t qdrap_trajectory_len(const struct QdrapTrajectory *trajectory);

/**
 * Excited-state population at the end of the grid and the photon yield
 * (final population plus everything emitted during the grid).
 *
 * # Safety
 * `trajectory` must be a live handle; the out-pointers must be valid.
 */
enum QdrapStatus qdrap_trajectory_summary(const struct QdrapTrajectory *trajectory,
                                          double *out_final_pe,
                                          double *out_photon_yield);

/**
 * Copy times (ps) and excited-state populations into caller buffers of
 * `len` elements each. Fails with `BufferTooSmall` if `len` is less than
 * [`qdrap_trajectory_len`].
 *
 * # Safety
 * `trajectory` must be a live handle; `times_ps` and `p_e` must each
 * point to `len` writable doubles.
 */
enum QdrapStatus qdrap_trajectory_copy(const struct QdrapTrajectory *trajectory,
                                       double *times_ps,
                                       double *p_e,
                                       size_t len);

/**
 * Group-delay dispersion (ps²) of a grating-pair stretcher.
 *
 * # Safety
 * `out_gdd_ps2` must be valid for a write.
 */
enum QdrapStatus qdrap_grating_gdd(double groove_density_per_mm,
                                   double wavelength_nm,
                                   double incidence_angle_deg,
                                   double effective_separation_mm,
                                   bool telescope_inserted,
                                   double *out_gdd_ps2);

/**
 * g²(0) and its standard error from a coincidence histogram.
 *
 * `counts` holds an odd number `len` of bins, the middle one centred on
 * zero delay. `n_side_peaks` counts the normalization peaks on both sides
 * together.
 *
 * # Safety
 * `counts` must point to `len` readable values; the out-pointers must be
 * valid.
 */
enum QdrapStatus qdrap_estimate_g2(const uint64_t *counts,
                                   size_t len,
                                   double bin_width_ns,
                                   double rep_period_ns,
                                   double window_ns,
                                   size_t n_side_peaks,
                                   double *out_g2,
                                   double *out_sigma);

/**
 * Process fidelity of the post-selected linear-optics CZ gate for a
 * two-photon overlap `overlap` in [0, 1].
 *
 * # Safety
 * `out_fidelity` must be valid for a write.
 */
enum QdrapStatus qdrap_cz_fidelity(double overlap, double *out_fidelity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDRAP_H */
