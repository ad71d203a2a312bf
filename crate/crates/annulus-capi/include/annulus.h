#ifndef ANNULUS_H
#define ANNULUS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Gravitational potential kinds.
 */
typedef enum AnnPotential {
  AnnPotential_LogRadial = 0,
  AnnPotential_UniformVertical = 1,
  AnnPotential_RadialLinear = 2,
} AnnPotential;

/**
 * Density profile kinds R(z).
 */
typedef enum AnnProfile {
  /**
   * R(z) = -gamma z + beta.
   */
  AnnProfile_Linear = 0,
  /**
   * R(z) = exp(rate z).
   */
  AnnProfile_Exp = 1,
  /**
   * R(z) = z.
   */
  AnnProfile_Identity = 2,
} AnnProfile;

/**
 * Stability classes mirrored for C callers.
 */
typedef enum AnnStability {
  AnnStability_Stable = 0,
  AnnStability_Unstable = 1,
  AnnStability_Indeterminate = 2,
} AnnStability;

/**
 * Status codes returned by every entry point.
 */
typedef enum AnnStatus {
  AnnStatus_Ok = 0,
  AnnStatus_NullArgument = 1,
  AnnStatus_Validation = 2,
  AnnStatus_Numeric = 3,
} AnnStatus;

/**
 * Opaque equilibrium handle, bundling the physics parameters.
 */
typedef struct AnnEquilibrium AnnEquilibrium;

/**
 * Opaque grid handle.
 */
typedef struct AnnGrid AnnGrid;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (NUL-terminated, truncated to
 * `cap`); returns the full message length in bytes.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be NULL with `cap = 0`.
 */
uintptr_t ann_last_error_message(char *buf, uintptr_t cap);

/**
 * Static library version string.
 */
const char *ann_version(void);

/**
 * Create a grid with inner radius `a`, outer radius `b`, `nr` radial nodes
 * and `ntheta` azimuthal nodes.
 *
 * # Safety
 * `out` must be a valid pointer; on success it receives an owned handle that
 * must be released with [`ann_grid_free`].
 */
enum AnnStatus ann_grid_new(double a, double b, uint32_t nr, uint32_t ntheta, struct AnnGrid **out);

/**
 * # Safety
 * `grid` must be a handle from [`ann_grid_new`], not yet freed; NULL is a no-op.
 */
void ann_grid_free(struct AnnGrid *grid);

/**
 * Build a hydrostatic equilibrium rho_s = R(f) on the grid together with
 * physics parameters (viscosity `nu`, reference density `rho_star`,
 * constant slip coefficient `alpha`). `p1` is gamma (Linear) or rate (Exp);
 * `p2` is beta (Linear).
 *
 * # Safety
 * `grid` must be a live handle; `out` must be valid and receives an owned
 * handle to release with [`ann_equilibrium_free`].
 */
enum AnnStatus ann_equilibrium_new(const struct AnnGrid *grid,
                                   enum AnnPotential potential,
                                   double g,
                                   enum AnnProfile profile,
                                   double p1,
                                   double p2,
                                   double nu,
                                   double rho_star,
                                   double alpha,
                                   struct AnnEquilibrium **out);

/**
 * # Safety
 * `eq` must be a handle from [`ann_equilibrium_new`], not yet freed; NULL is
 * a no-op.
 */
void ann_equilibrium_free(struct AnnEquilibrium *eq);

/**
 * Classify the equilibrium by the sign of h. `out_h` receives h0 for stable
 * profiles and max h for unstable ones.
 *
 * # Safety
 * `eq` must be live; out pointers must be valid or NULL.
 */
enum AnnStatus ann_classify(const struct AnnEquilibrium *eq,
                            enum AnnStability *out_class,
                            double *out_h);

/**
 * Rayleigh-Taylor growth rate over azimuthal modes 0..=m_max.
 * `out_found` is 0 for spectrally stable configurations; otherwise
 * `out_lambda` and `out_mode` describe the dominant growth mode.
 *
 * # Safety
 * `eq` must be live; out pointers must be valid or NULL.
 */
enum AnnStatus ann_growth_rate(const struct AnnEquilibrium *eq,
                               uint32_t m_max,
                               int32_t *out_found,
                               double *out_lambda,
                               int64_t *out_mode);

/**
 * The parametrized infimum alpha(s) for one azimuthal mode.
 *
 * # Safety
 * `eq` must be live; `out_alpha` must be valid.
 */
enum AnnStatus ann_alpha_of_s(const struct AnnEquilibrium *eq,
                              uint32_t m,
                              double s,
                              double *out_alpha);

/**
 * Run a full simulation described by a config file, writing the run
 * directory under `out_dir` exactly like the `simulate` subcommand.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum AnnStatus ann_run_simulation(const char *config_path, const char *out_dir);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* ANNULUS_H */
