#ifndef GIANT_ATOMS_H
#define GIANT_ATOMS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define GA_OK 0

#define GA_ERR_NULL 1

#define GA_ERR_INVALID 2

#define GA_ERR_NUMERICAL 3

#define GA_ERR_IO 4

#define GA_ERR_PANIC 5

#define GA_TOPOLOGY_SMALL 0

#define GA_TOPOLOGY_SEPARATE 1

#define GA_TOPOLOGY_BRAIDED 2

#define GA_TOPOLOGY_NESTED 3

#define GA_TOPOLOGY_UNCLASSIFIED 4

/**
 * Opaque set of coupling points.
 */
typedef struct GaLayout GaLayout;

/**
 * Opaque single-excitation trajectory.
 */
typedef struct GaTrajectory GaTrajectory;

/**
 * Group velocity `v` and single-point decay rate `gamma`.
 */
typedef struct GaWaveguide {
  double v;
  double gamma;
} GaWaveguide;

typedef struct GaTwoAtom {
  double g;
  double gamma_a;
  double gamma_b;
  double gamma_coll;
} GaTwoAtom;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ga_version(void);

/**
 * Message of the last failure on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *ga_last_error(void);

/**
 * # Safety
 * `out` must be valid for a pointer write.
 */
int ga_layout_equidistant(size_t n, double spacing, double strength, struct GaLayout **out);

/**
 * Layout from `len` positions and strengths.
 *
 * # Safety
 * `positions` and `strengths` must each point to `len` readable doubles.
 */
int ga_layout_from_points(const double *positions,
                          const double *strengths,
                          size_t len,
                          struct GaLayout **out);

/**
 * Load a `.toml` or `.json` layout document.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` valid for a pointer write.
 */
int ga_layout_load(const char *path, struct GaLayout **out);

/**
 * # Safety
 * `layout` must come from a `ga_layout_*` constructor and not be used
 * afterwards. NULL is ignored.
 */
void ga_layout_free(struct GaLayout *layout);

/**
 * Number of coupling points, or 0 for NULL.
 *
 * # Safety
 * `layout` must be NULL or a live handle.
 */
size_t ga_layout_len(const struct GaLayout *layout);

/**
 * # Safety
 * `layout` must be a live handle; `out` valid for a write.
 */
int ga_relaxation_rate(const struct GaLayout *layout,
                       struct GaWaveguide wg,
                       double omega,
                       double *out);

/**
 * # Safety
 * `layout` must be a live handle; `out` valid for a write.
 */
int ga_lamb_shift(const struct GaLayout *layout, struct GaWaveguide wg, double omega, double *out);

/**
 * Closed-form rate of `n` equidistant unit points at neighbour phase `phi`.
 */
double ga_relaxation_rate_equidistant(size_t n, double phi, double gamma);

double ga_lamb_shift_equidistant(size_t n, double phi, double gamma);

/**
 * # Safety
 * `a`, `b` must be live handles; `out` valid for a write.
 */
int ga_two_atom_coefficients(const struct GaLayout *a,
                             const struct GaLayout *b,
                             struct GaWaveguide wg,
                             double omega,
                             struct GaTwoAtom *out);

/**
 * Writes one of the `GA_TOPOLOGY_*` codes.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` valid for a write.
 */
int ga_classify_topology(const struct GaLayout *a, const struct GaLayout *b, int *out);

/**
 * Delay-equation evolution from the excited atom.
 *
 * # Safety
 * `layout` must be a live handle; `out` valid for a pointer write.
 */
int ga_dde_evolve(const struct GaLayout *layout,
                  struct GaWaveguide wg,
                  double omega_a,
                  double t_end,
                  double dt,
                  struct GaTrajectory **out);

/**
 * Sample count, or 0 for NULL.
 *
 * # Safety
 * `traj` must be NULL or a live handle.
 */
size_t ga_trajectory_len(const struct GaTrajectory *traj);

/**
 * Copy the samples into caller buffers of at least `ga_trajectory_len`
 * entries. Any buffer may be NULL to skip it.
 *
 * # Safety
 * `traj` must be a live handle; non-NULL buffers must hold `capacity`
 * doubles.
 */
int ga_trajectory_copy(const struct GaTrajectory *traj,
                       double *times,
                       double *re,
                       double *im,
                       double *energy,
                       size_t capacity);

/**
 * # Safety
 * `traj` must come from `ga_dde_evolve` and not be used afterwards. NULL
 * is ignored.
 */
void ga_trajectory_free(struct GaTrajectory *traj);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GIANT_ATOMS_H */
