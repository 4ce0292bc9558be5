#ifndef PMELAB_H
#define PMELAB_H

#include <stdbool.h>
#include <stddef.h>

typedef enum PmeStatus {
  PME_STATUS_OK = 0,
  PME_STATUS_NULL_POINTER = 1,
  PME_STATUS_INVALID_PARAMETER = 2,
  PME_STATUS_INVALID_INITIAL_DATA = 3,
  PME_STATUS_DOMAIN_TOO_SMALL = 4,
  PME_STATUS_UNSTABLE = 5,
  PME_STATUS_NUMERICAL = 6,
  PME_STATUS_OUT_OF_RANGE = 7,
  PME_STATUS_IO = 8,
  PME_STATUS_PANIC = 9,
} PmeStatus;

typedef enum PmeInitialKind {
  // `p0 = C`, `p1` = clock offset.
  PME_INITIAL_KIND_BARENBLATT = 0,
  // `p0` = amplitude, `p1` = width.
  PME_INITIAL_KIND_GAUSSIAN = 1,
  // `p0` = amplitude, `p1` = radius.
  PME_INITIAL_KIND_BUMP = 2,
} PmeInitialKind;

// Opaque solver output.
typedef struct PmeTrajectory PmeTrajectory;

// Problem description for [`pme_solve`]. `snapshot_times` may be null when
// `snapshot_count` is 0, in which case only `t0` and `t1` are stored.
typedef struct PmeProblemDesc {
  double m;
  double eta;
  size_t dim;
  double half_width;
  size_t points;
  double t0;
  double t1;
  enum PmeInitialKind kind;
  double p0;
  double p1;
  const double *snapshot_times;
  size_t snapshot_count;
  double cfl_safety;
} PmeProblemDesc;

typedef struct PmeCheckResult {
  double statistic;
  double bound;
  double margin;
  double tolerance;
  bool pass;
} PmeCheckResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *pme_last_error(void);

// Similarity exponents `lambda`, `mu` and the profile constant `kappa`.
//
// # Safety
// Output pointers must be valid for writes.
enum PmeStatus pme_barenblatt_constants(double m,
                                        size_t n,
                                        double *lambda,
                                        double *mu,
                                        double *kappa);

// Value of the source-type solution at `x` (length `n`) and time `t`.
//
// # Safety
// `x` must point to `n` readable doubles and `value` must be valid for writes.
enum PmeStatus pme_barenblatt_eval(double m,
                                   size_t n,
                                   double c,
                                   double offset,
                                   const double *x,
                                   double t,
                                   double *value);

// Support radius of the source-type solution at time `t`.
//
// # Safety
// `radius` must be valid for writes.
enum PmeStatus pme_barenblatt_support_radius(double m,
                                             size_t n,
                                             double c,
                                             double offset,
                                             double t,
                                             double *radius);

// Profile constant `C` of the source-type solution with the given mass.
//
// # Safety
// `c` must be valid for writes.
enum PmeStatus pme_barenblatt_constant_for_mass(double m, size_t n, double mass, double *c);

// Lower bound `chi(t)` on the support radius for data of the given mass.
//
// # Safety
// `chi` must be valid for writes.
enum PmeStatus pme_chi_lower_bound(double t, double m, size_t n, double mass, double *chi);

// `|a - b|^beta` and `|a^beta - b^beta|` for `beta > 1`.
//
// # Safety
// Output pointers must be valid for writes.
enum PmeStatus pme_pow_diff(double a, double b, double beta, double *lhs, double *rhs, bool *holds);

// Run the explicit solver; on success `*trajectory` owns the result.
//
// # Safety
// `desc` must point to a valid description whose `snapshot_times` holds
// `snapshot_count` doubles; `trajectory` must be valid for writes.
enum PmeStatus pme_solve(const struct PmeProblemDesc *desc, struct PmeTrajectory **trajectory);

// Release a trajectory; null is ignored.
//
// # Safety
// `trajectory` must come from [`pme_solve`] and not be used afterwards.
void pme_trajectory_free(struct PmeTrajectory *trajectory);

// Number of stored snapshots and grid samples per snapshot.
//
// # Safety
// `trajectory` must be a live handle; outputs must be valid for writes.
enum PmeStatus pme_trajectory_shape(const struct PmeTrajectory *trajectory,
                                    size_t *snapshots,
                                    size_t *samples);

// Time and values of snapshot `index`; `values` must hold `len` doubles and
// `len` must equal the sample count.
//
// # Safety
// `trajectory` must be a live handle; `t` and `values` must be valid for writes.
enum PmeStatus pme_trajectory_snapshot(const struct PmeTrajectory *trajectory,
                                       size_t index,
                                       double *t,
                                       double *values,
                                       size_t len);

// Relative mass drift over the run.
//
// # Safety
// `trajectory` must be a live handle; `result` must be valid for writes.
enum PmeStatus pme_check_mass(const struct PmeTrajectory *trajectory,
                              struct PmeCheckResult *result);

// One-sided time-derivative bound checked with exponent label `m`.
//
// # Safety
// `trajectory` must be a live handle; `result` must be valid for writes.
enum PmeStatus pme_check_ab_time(const struct PmeTrajectory *trajectory,
                                 double m,
                                 struct PmeCheckResult *result);

// Gradient bound for `u^h` with data bound `sup`.
//
// # Safety
// `trajectory` must be a live handle; `result` must be valid for writes.
enum PmeStatus pme_check_gradient_bound(const struct PmeTrajectory *trajectory,
                                        double h,
                                        double sup,
                                        struct PmeCheckResult *result);

// Numerical support radius against `chi(t)` for data of the given mass.
//
// # Safety
// `trajectory` must be a live handle; `result` must be valid for writes.
enum PmeStatus pme_check_propagation(const struct PmeTrajectory *trajectory,
                                     double mass,
                                     struct PmeCheckResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PMELAB_H */
