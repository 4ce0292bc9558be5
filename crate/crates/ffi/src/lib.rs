//! C ABI for the solver, the source-type solution and the trajectory checks.
//!
//! Every function returns a [`PmeStatus`]; on failure the message is available
//! from [`pme_last_error`] on the same thread. Trajectories are opaque handles
//! released with [`pme_trajectory_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pmelab::analytic::{barenblatt_constants, chi_lower_bound, BarenblattSpec};
use pmelab::field::{Grid, Trajectory};
use pmelab::harness::{self, CheckReport};
use pmelab::inequalities::pow_diff_holds;
use pmelab::solver::{solve_pme, InitialCondition, PmeProblem, SchemeConfig};
use pmelab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    InvalidInitialData = 3,
    DomainTooSmall = 4,
    Unstable = 5,
    Numerical = 6,
    OutOfRange = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmeInitialKind {
    /// `p0 = C`, `p1` = clock offset.
    Barenblatt = 0,
    /// `p0` = amplitude, `p1` = width.
    Gaussian = 1,
    /// `p0` = amplitude, `p1` = radius.
    Bump = 2,
}

/// Problem description for [`pme_solve`]. `snapshot_times` may be null when
/// `snapshot_count` is 0, in which case only `t0` and `t1` are stored.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PmeProblemDesc {
    pub m: f64,
    pub eta: f64,
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub t0: f64,
    pub t1: f64,
    pub kind: PmeInitialKind,
    pub p0: f64,
    pub p1: f64,
    pub snapshot_times: *const f64,
    pub snapshot_count: usize,
    pub cfl_safety: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PmeCheckResult {
    pub statistic: f64,
    pub bound: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl From<&CheckReport> for PmeCheckResult {
    fn from(r: &CheckReport) -> Self {
        Self {
            statistic: r.statistic,
            bound: r.bound,
            margin: r.margin,
            tolerance: r.tolerance,
            pass: r.pass,
        }
    }
}

/// Opaque solver output.
pub struct PmeTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|b| *b != 0);
    let text = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn status_of(e: &Error) -> PmeStatus {
    match e {
        Error::InvalidParameter { .. } | Error::Config { .. } => PmeStatus::InvalidParameter,
        Error::InvalidInitialData(_) => PmeStatus::InvalidInitialData,
        Error::DomainTooSmall { .. } => PmeStatus::DomainTooSmall,
        Error::Unstable { .. } => PmeStatus::Unstable,
        Error::Quadrature { .. } | Error::Insufficient(_) | Error::NotConverging(_) => PmeStatus::Numerical,
        Error::Table { .. } | Error::Io { .. } | Error::EmptyReport => PmeStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Range(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(body: impl FnOnce() -> Result<(), Fail>) -> PmeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => PmeStatus::Ok,
        Ok(Err(Fail::Null(name))) => {
            set_error(format!("null pointer passed for `{name}`"));
            PmeStatus::NullPointer
        }
        Ok(Err(Fail::Range(msg))) => {
            set_error(msg);
            PmeStatus::OutOfRange
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic");
            PmeStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(name))
}

unsafe fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(name))
}

/// Message of the last failed call on this thread; empty if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pme_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Similarity exponents `lambda`, `mu` and the profile constant `kappa`.
///
/// # Safety
/// Output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_barenblatt_constants(
    m: f64,
    n: usize,
    lambda: *mut f64,
    mu: *mut f64,
    kappa: *mut f64,
) -> PmeStatus {
    guard(|| {
        let p = barenblatt_constants(m, n)?;
        *out(lambda, "lambda")? = p.lambda;
        *out(mu, "mu")? = p.mu;
        *out(kappa, "kappa")? = p.kappa;
        Ok(())
    })
}

/// Value of the source-type solution at `x` (length `n`) and time `t`.
///
/// # Safety
/// `x` must point to `n` readable doubles and `value` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_barenblatt_eval(
    m: f64,
    n: usize,
    c: f64,
    offset: f64,
    x: *const f64,
    t: f64,
    value: *mut f64,
) -> PmeStatus {
    guard(|| {
        let spec = BarenblattSpec::new(m, n, c, offset)?;
        let x = slice::from_raw_parts(input(x, "x")?, n);
        *out(value, "value")? = spec.eval(x, t)?;
        Ok(())
    })
}

/// Support radius of the source-type solution at time `t`.
///
/// # Safety
/// `radius` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_barenblatt_support_radius(
    m: f64,
    n: usize,
    c: f64,
    offset: f64,
    t: f64,
    radius: *mut f64,
) -> PmeStatus {
    guard(|| {
        *out(radius, "radius")? = BarenblattSpec::new(m, n, c, offset)?.support_radius(t)?;
        Ok(())
    })
}

/// Profile constant `C` of the source-type solution with the given mass.
///
/// # Safety
/// `c` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_barenblatt_constant_for_mass(m: f64, n: usize, mass: f64, c: *mut f64) -> PmeStatus {
    guard(|| {
        *out(c, "c")? = BarenblattSpec::with_mass(m, n, mass, 0.0)?.c;
        Ok(())
    })
}

/// Lower bound `chi(t)` on the support radius for data of the given mass.
///
/// # Safety
/// `chi` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_chi_lower_bound(t: f64, m: f64, n: usize, mass: f64, chi: *mut f64) -> PmeStatus {
    guard(|| {
        *out(chi, "chi")? = chi_lower_bound(t, m, n, mass)?;
        Ok(())
    })
}

/// `|a - b|^beta` and `|a^beta - b^beta|` for `beta > 1`.
///
/// # Safety
/// Output pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_pow_diff(
    a: f64,
    b: f64,
    beta: f64,
    lhs: *mut f64,
    rhs: *mut f64,
    holds: *mut bool,
) -> PmeStatus {
    guard(|| {
        let r = pow_diff_holds(a, b, beta)?;
        *out(lhs, "lhs")? = r.lhs;
        *out(rhs, "rhs")? = r.rhs;
        *out(holds, "holds")? = r.holds;
        Ok(())
    })
}

/// Run the explicit solver; on success `*trajectory` owns the result.
///
/// # Safety
/// `desc` must point to a valid description whose `snapshot_times` holds
/// `snapshot_count` doubles; `trajectory` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_solve(desc: *const PmeProblemDesc, trajectory: *mut *mut PmeTrajectory) -> PmeStatus {
    guard(|| {
        let d = input(desc, "desc")?;
        let slot = out(trajectory, "trajectory")?;
        *slot = ptr::null_mut();
        let grid = Grid::new(d.dim, d.half_width, d.points)?;
        let initial = match d.kind {
            PmeInitialKind::Barenblatt => InitialCondition::Barenblatt { c: d.p0, offset: d.p1 },
            PmeInitialKind::Gaussian => InitialCondition::Gaussian {
                amplitude: d.p0,
                width: d.p1,
            },
            PmeInitialKind::Bump => InitialCondition::Bump {
                amplitude: d.p0,
                radius: d.p1,
            },
        };
        let times = if d.snapshot_count == 0 {
            Vec::new()
        } else {
            slice::from_raw_parts(input(d.snapshot_times, "snapshot_times")?, d.snapshot_count).to_vec()
        };
        let problem = PmeProblem::new(d.m, initial, d.t0, d.t1)
            .with_eta(d.eta)
            .with_snapshots(times);
        let config = SchemeConfig {
            cfl_safety: if d.cfl_safety > 0.0 { d.cfl_safety } else { SchemeConfig::default().cfl_safety },
            ..SchemeConfig::default()
        };
        let tr = solve_pme(&problem, &grid, &config)?;
        *slot = Box::into_raw(Box::new(PmeTrajectory(tr)));
        Ok(())
    })
}

/// Release a trajectory; null is ignored.
///
/// # Safety
/// `trajectory` must come from [`pme_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_free(trajectory: *mut PmeTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of stored snapshots and grid samples per snapshot.
///
/// # Safety
/// `trajectory` must be a live handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_shape(
    trajectory: *const PmeTrajectory,
    snapshots: *mut usize,
    samples: *mut usize,
) -> PmeStatus {
    guard(|| {
        let tr = &input(trajectory, "trajectory")?.0;
        *out(snapshots, "snapshots")? = tr.snapshots.len();
        *out(samples, "samples")? = tr.grid().map_or(0, Grid::len);
        Ok(())
    })
}

/// Time and values of snapshot `index`; `values` must hold `len` doubles and
/// `len` must equal the sample count.
///
/// # Safety
/// `trajectory` must be a live handle; `t` and `values` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_trajectory_snapshot(
    trajectory: *const PmeTrajectory,
    index: usize,
    t: *mut f64,
    values: *mut f64,
    len: usize,
) -> PmeStatus {
    guard(|| {
        let tr = &input(trajectory, "trajectory")?.0;
        let f = tr
            .snapshots
            .get(index)
            .ok_or_else(|| Fail::Range(format!("snapshot {index} of {}", tr.snapshots.len())))?;
        if len != f.values.len() {
            return Err(Fail::Range(format!("buffer holds {len} values, snapshot has {}", f.values.len())));
        }
        *out(t, "t")? = f.t;
        let dst = slice::from_raw_parts_mut(out(values, "values")?, len);
        dst.copy_from_slice(&f.values);
        Ok(())
    })
}

unsafe fn check(
    trajectory: *const PmeTrajectory,
    result: *mut PmeCheckResult,
    run: impl FnOnce(&Trajectory) -> pmelab::Result<CheckReport>,
) -> PmeStatus {
    guard(|| {
        let tr = &input(trajectory, "trajectory")?.0;
        let slot = out(result, "result")?;
        *slot = PmeCheckResult::from(&run(tr)?);
        Ok(())
    })
}

/// Relative mass drift over the run.
///
/// # Safety
/// `trajectory` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_check_mass(trajectory: *const PmeTrajectory, result: *mut PmeCheckResult) -> PmeStatus {
    check(trajectory, result, harness::check_mass)
}

/// One-sided time-derivative bound checked with exponent label `m`.
///
/// # Safety
/// `trajectory` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_check_ab_time(
    trajectory: *const PmeTrajectory,
    m: f64,
    result: *mut PmeCheckResult,
) -> PmeStatus {
    check(trajectory, result, |tr| harness::check_ab_time(tr, m))
}

/// Gradient bound for `u^h` with data bound `sup`.
///
/// # Safety
/// `trajectory` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_check_gradient_bound(
    trajectory: *const PmeTrajectory,
    h: f64,
    sup: f64,
    result: *mut PmeCheckResult,
) -> PmeStatus {
    check(trajectory, result, |tr| harness::check_gradient_bound_trajectory(tr, h, sup))
}

/// Numerical support radius against `chi(t)` for data of the given mass.
///
/// # Safety
/// `trajectory` must be a live handle; `result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn pme_check_propagation(
    trajectory: *const PmeTrajectory,
    mass: f64,
    result: *mut PmeCheckResult,
) -> PmeStatus {
    check(trajectory, result, |tr| {
        let n = tr.grid().map_or(1, Grid::dim);
        harness::check_propagation(tr, tr.m, n, mass)
    })
}
