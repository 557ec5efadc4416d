#ifndef SDC_H
#define SDC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SdcStatus {
  SDC_STATUS_OK = 0,
  SDC_STATUS_NULL_POINTER = 1,
  SDC_STATUS_INVALID_ARGUMENT = 2,
  SDC_STATUS_UNSUPPORTED_NODES = 3,
  SDC_STATUS_NODE_SOLVE = 4,
  SDC_STATUS_DIVERGENCE = 5,
  SDC_STATUS_SINGULAR = 6,
  SDC_STATUS_ANALYSIS = 7,
  SDC_STATUS_NO_EXACT_SOLUTION = 8,
  SDC_STATUS_PANIC = 9,
  SDC_STATUS_INTERNAL = 10,
} SdcStatus;

typedef enum SdcNodeFamily {
  SDC_NODE_FAMILY_LEGENDRE = 0,
  SDC_NODE_FAMILY_LOBATTO = 1,
  SDC_NODE_FAMILY_RADAU = 2,
  SDC_NODE_FAMILY_RADAU_LEFT = 3,
} SdcNodeFamily;

typedef enum SdcGuess {
  SDC_GUESS_COPY = 0,
  SDC_GUESS_VERLET = 1,
  SDC_GUESS_RANDOM = 2,
} SdcGuess;

typedef enum SdcScanKind {
  SDC_SCAN_KIND_SDC_STABILITY = 0,
  SDC_SCAN_KIND_SDC_CONVERGENCE = 1,
  SDC_SCAN_KIND_PICARD_STABILITY = 2,
  SDC_SCAN_KIND_PICARD_CONVERGENCE = 3,
  SDC_SCAN_KIND_RKN4 = 4,
  SDC_SCAN_KIND_COLLOCATION = 5,
} SdcScanKind;

/*
 Opaque second-order problem.
 */
typedef struct SdcProblem SdcProblem;

/*
 Opaque SDC sweeper configuration.
 */
typedef struct SdcSweeper SdcSweeper;

/*
 Work and convergence information of one step.
 */
typedef struct SdcStepInfo {
  uint64_t f_evals;
  size_t iterations;
  double residual;
} SdcStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread; empty after a successful call.
 The pointer stays valid until the next call into this library on the same thread.
 */
const char *sdc_last_error(void);

/*
 Writes the `m` nodes and weights of a rule on [0, 1] into `tau` and `weights`.

 # Safety
 `tau` and `weights` must each point to `m` writable doubles.
 */
enum SdcStatus sdc_nodes(enum SdcNodeFamily family, size_t m, double *tau, double *weights);

/*
 Damped oscillator `x'' = -kappa x - mu x'`.

 # Safety
 `out` must point to writable storage for one handle.
 */
enum SdcStatus sdc_oscillator_new(double kappa, double mu, struct SdcProblem **out);

/*
 Charged particle in a Penning trap.

 # Safety
 `out` must point to writable storage for one handle.
 */
enum SdcStatus sdc_penning_new(double omega_b,
                               double omega_e,
                               double epsilon,
                               double alpha,
                               struct SdcProblem **out);

/*
 Releases a problem. Null is ignored.

 # Safety
 `problem` must come from a `*_new` call of this library and not be used afterwards.
 */
void sdc_problem_free(struct SdcProblem *problem);

/*
 Dimension of the position vector, 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
size_t sdc_problem_dim(const struct SdcProblem *problem);

/*
 Force evaluations since creation or the last reset, 0 for a null handle.

 # Safety
 `problem` must be null or a live handle.
 */
uint64_t sdc_problem_f_evals(const struct SdcProblem *problem);

/*
 # Safety
 `problem` must be null or a live handle.
 */
enum SdcStatus sdc_problem_reset_evals(const struct SdcProblem *problem);

/*
 Exact solution at time `t` from `(x0, v0)`, written to `x_out` and `v_out`.

 # Safety
 All arrays must hold `dim` doubles; `problem` must be a live handle.
 */
enum SdcStatus sdc_problem_exact(const struct SdcProblem *problem,
                                 double t,
                                 const double *x0,
                                 const double *v0,
                                 size_t dim,
                                 double *x_out,
                                 double *v_out);

/*
 Sweeper with `m` nodes and `k` sweeps per step. A positive `residual_tol` stops
 early once the collocation residual drops below it; `seed` is used by the random start.

 # Safety
 `out` must point to writable storage for one handle.
 */
enum SdcStatus sdc_sweeper_new(enum SdcNodeFamily family,
                               size_t m,
                               size_t k,
                               enum SdcGuess guess,
                               uint64_t seed,
                               double residual_tol,
                               struct SdcSweeper **out);

/*
 Releases a sweeper. Null is ignored.

 # Safety
 `sweeper` must come from [`sdc_sweeper_new`] and not be used afterwards.
 */
void sdc_sweeper_free(struct SdcSweeper *sweeper);

/*
 One SDC step of size `dt`, updating `x` and `v` in place. `info` may be null.

 # Safety
 `x` and `v` must hold `dim` doubles; handles must be live.
 */
enum SdcStatus sdc_step(const struct SdcProblem *problem,
                        const struct SdcSweeper *sweeper,
                        double dt,
                        double *x,
                        double *v,
                        size_t dim,
                        struct SdcStepInfo *info);

/*
 Integrates from `t0` to `t_end` with step `dt` (the last step is shortened if
 needed), updating `x` and `v` in place. `f_evals` may be null.

 # Safety
 `x` and `v` must hold `dim` doubles; handles must be live.
 */
enum SdcStatus sdc_integrate(const struct SdcProblem *problem,
                             const struct SdcSweeper *sweeper,
                             double t0,
                             double t_end,
                             double dt,
                             double *x,
                             double *v,
                             size_t dim,
                             uint64_t *f_evals);

/*
 Spectral radius of the chosen matrix for the damped oscillator at `(dt kappa, dt mu)`.
 `k` is the iteration count for the stability kinds and ignored otherwise.

 # Safety
 `out` must point to one writable double.
 */
enum SdcStatus sdc_stability_rho(enum SdcScanKind kind,
                                 size_t k,
                                 enum SdcNodeFamily family,
                                 size_t m,
                                 double dt_kappa,
                                 double dt_mu,
                                 double *out);

/*
 Largest stable `dt kappa` on the undamped axis, to 0.01.

 # Safety
 `out` must point to one writable double.
 */
enum SdcStatus sdc_stability_limit(enum SdcScanKind kind,
                                   size_t k,
                                   enum SdcNodeFamily family,
                                   size_t m,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SDC_H */
