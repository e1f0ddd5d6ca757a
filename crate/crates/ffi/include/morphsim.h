#ifndef MORPHSIM_H
#define MORPHSIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum MsStatus {
  MS_STATUS_OK = 0,
  MS_STATUS_NULL_POINTER = 1,
  MS_STATUS_INVALID_ARGUMENT = 2,
  MS_STATUS_IO = 3,
  MS_STATUS_PARSE = 4,
  MS_STATUS_NUMERICAL = 5,
  MS_STATUS_PANIC = 6,
} MsStatus;

/**
 * Bending model selecting the target forms.
 */
typedef enum MsModel {
  MS_MODEL_FINITE_STRAIN = 0,
  MS_MODEL_PURE_BENDING = 1,
} MsModel;

/**
 * Why the solver stopped.
 */
typedef enum MsTermination {
  MS_TERMINATION_GRADIENT = 0,
  MS_TERMINATION_STEP = 1,
  MS_TERMINATION_MAX_ITERS = 2,
} MsTermination;

/**
 * Opaque design handle.
 */
typedef struct MsDesign MsDesign;

/**
 * Opaque simulation result handle.
 */
typedef struct MsResult MsResult;

/**
 * Solver parameters. A negative `perturb_amplitude` selects the default
 * amplitude derived from the mesh pitch.
 */
typedef struct MsSolverConfig {
  double tau;
  double eps1;
  double eps2;
  uint32_t k_max;
  double perturb_amplitude;
  uint64_t seed;
} MsSolverConfig;

/**
 * Helix fitted to a strip's mid-line.
 */
typedef struct MsHelix {
  double radius;
  double pitch;
  int32_t handedness;
  double axis[3];
  double rms;
} MsHelix;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null if none. The string stays
 * valid until the next failing call on the same thread.
 */
const char *ms_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ms_version(void);

/**
 * Fills `out` with the default solver parameters.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `MsSolverConfig`.
 */
enum MsStatus ms_solver_config_default(struct MsSolverConfig *out);

/**
 * Strain difference produced by top-layer printing speed `v_top` (mm/min).
 *
 * # Safety
 * `out` must be null or point to a writable `double`.
 */
enum MsStatus ms_strain_from_speed(double v_top, double *out);

/**
 * Small-strain bending radius `2t/(3Δε)`.
 */
double ms_timoshenko_radius(double delta_eps, double thickness);

/**
 * Rectangular strip with uniform strain difference along `(dir_x, dir_y)`.
 *
 * # Safety
 * `out` must be null or point to a writable handle slot.
 */
enum MsStatus ms_design_rect(double length,
                             double width,
                             double thickness,
                             double pitch,
                             double delta_eps,
                             double dir_x,
                             double dir_y,
                             enum MsModel model,
                             struct MsDesign **out);

/**
 * Square plate with four petals around a strain-free center.
 *
 * # Safety
 * `out` must be null or point to a writable handle slot.
 */
enum MsStatus ms_design_flower(double total_side,
                               double center_side,
                               double thickness,
                               double pitch,
                               double delta_eps,
                               struct MsDesign **out);

/**
 * Strip printed at `gamma_deg` degrees to its long axis.
 *
 * # Safety
 * `out` must be null or point to a writable handle slot.
 */
enum MsStatus ms_design_grass(double length,
                              double width,
                              double thickness,
                              double pitch,
                              double gamma_deg,
                              double delta_eps,
                              struct MsDesign **out);

/**
 * Reads a design JSON file.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * point to a writable handle slot.
 */
enum MsStatus ms_design_load(const char *path, struct MsDesign **out);

/**
 * Writes a design JSON file.
 *
 * # Safety
 * `design` must be null or a live handle; `path` null or NUL-terminated.
 */
enum MsStatus ms_design_save(const struct MsDesign *design, const char *path);

/**
 * Number of faces in the design mesh, 0 for a null handle.
 *
 * # Safety
 * `design` must be null or a live handle.
 */
size_t ms_design_num_faces(const struct MsDesign *design);

/**
 * Number of vertices in the design mesh, 0 for a null handle.
 *
 * # Safety
 * `design` must be null or a live handle.
 */
size_t ms_design_num_vertices(const struct MsDesign *design);

/**
 * Releases a design. Null is a no-op.
 *
 * # Safety
 * `design` must be null or a handle not yet freed.
 */
void ms_design_free(struct MsDesign *design);

/**
 * Relaxes `design` to equilibrium. `config` may be null for defaults;
 * design-level overrides take precedence either way.
 *
 * # Safety
 * `design` must be null or a live handle; `config` null or a valid
 * `MsSolverConfig`; `out` null or a writable handle slot.
 */
enum MsStatus ms_simulate(const struct MsDesign *design,
                          const struct MsSolverConfig *config,
                          struct MsResult **out);

/**
 * Releases a result. Null is a no-op.
 *
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void ms_result_free(struct MsResult *result);

/**
 * Number of vertices in the converged mesh, 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ms_result_num_vertices(const struct MsResult *result);

/**
 * Copies converged positions as `x0 y0 z0 x1 ...` into `buf`, which must
 * hold at least `3 * ms_result_num_vertices` doubles.
 *
 * # Safety
 * `result` must be null or a live handle; `buf` must be null or point to
 * `len` writable doubles.
 */
enum MsStatus ms_result_vertices(const struct MsResult *result, double *buf, size_t len);

/**
 * Solver iteration count, 0 for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t ms_result_iterations(const struct MsResult *result);

/**
 * Final `‖f‖²`, NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double ms_result_final_energy(const struct MsResult *result);

/**
 * Stopping reason.
 *
 * # Safety
 * `result` must be null or a live handle; `out` null or writable.
 */
enum MsStatus ms_result_termination(const struct MsResult *result, enum MsTermination *out);

/**
 * Writes the converged mesh as OBJ.
 *
 * # Safety
 * `result` must be null or a live handle; `path` null or NUL-terminated.
 */
enum MsStatus ms_result_save_obj(const struct MsResult *result, const char *path);

/**
 * Radius of the circle fitted to the mid-line along `(dir_x, dir_y)`.
 * Infinite for a straight mid-line. `orientation` (optional) receives +1
 * when the top layer is concave, −1 when the bottom is, 0 when flat.
 *
 * # Safety
 * `result` must be null or a live handle; `radius` null or writable;
 * `orientation` null or writable.
 */
enum MsStatus ms_result_bend_radius(const struct MsResult *result,
                                    double dir_x,
                                    double dir_y,
                                    double *radius,
                                    int32_t *orientation);

/**
 * Helix fitted to the mid-line along `(dir_x, dir_y)`.
 *
 * # Safety
 * `result` must be null or a live handle; `out` null or writable.
 */
enum MsStatus ms_result_helix(const struct MsResult *result,
                              double dir_x,
                              double dir_y,
                              struct MsHelix *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MORPHSIM_H */
