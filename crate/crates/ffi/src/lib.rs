//! C interface to `sdc-core`.
//!
//! Problems and sweepers are opaque heap handles created by `*_new` and released by
//! `*_free`. Every fallible call returns an [`SdcStatus`]; on failure the message is
//! available from [`sdc_last_error`] on the same thread. Panics are caught at the
//! boundary and reported as [`SdcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use sdc_core::problems::{make_oscillator, make_penning, PenningParams, SecondOrderIvp};
use sdc_core::quadrature::{NodeFamily, QuadratureRule};
use sdc_core::sdc::{self, integrate, InitialGuess, StopRule, SweeperConfig};
use sdc_core::stability::{rho, stability_limit, ScanKind};
use sdc_core::SdcError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnsupportedNodes = 3,
    NodeSolve = 4,
    Divergence = 5,
    Singular = 6,
    Analysis = 7,
    NoExactSolution = 8,
    Panic = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdcNodeFamily {
    Legendre = 0,
    Lobatto = 1,
    Radau = 2,
    RadauLeft = 3,
}

impl From<SdcNodeFamily> for NodeFamily {
    fn from(f: SdcNodeFamily) -> Self {
        match f {
            SdcNodeFamily::Legendre => NodeFamily::GaussLegendre,
            SdcNodeFamily::Lobatto => NodeFamily::GaussLobatto,
            SdcNodeFamily::Radau => NodeFamily::GaussRadau,
            SdcNodeFamily::RadauLeft => NodeFamily::GaussRadauLeft,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdcGuess {
    Copy = 0,
    Verlet = 1,
    Random = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdcScanKind {
    SdcStability = 0,
    SdcConvergence = 1,
    PicardStability = 2,
    PicardConvergence = 3,
    Rkn4 = 4,
    Collocation = 5,
}

fn scan_kind(kind: SdcScanKind, k: usize) -> ScanKind {
    match kind {
        SdcScanKind::SdcStability => ScanKind::SdcStability(k),
        SdcScanKind::SdcConvergence => ScanKind::SdcConvergence,
        SdcScanKind::PicardStability => ScanKind::PicardStability(k),
        SdcScanKind::PicardConvergence => ScanKind::PicardConvergence,
        SdcScanKind::Rkn4 => ScanKind::Rkn4,
        SdcScanKind::Collocation => ScanKind::Collocation,
    }
}

/// Work and convergence information of one step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SdcStepInfo {
    pub f_evals: u64,
    pub iterations: usize,
    pub residual: f64,
}

/// Opaque second-order problem.
pub struct SdcProblem {
    inner: SecondOrderIvp,
}

/// Opaque SDC sweeper configuration.
pub struct SdcSweeper {
    inner: SweeperConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &SdcError) -> SdcStatus {
    match err {
        SdcError::UnsupportedNodes { .. } | SdcError::NodeConvergence { .. } => SdcStatus::UnsupportedNodes,
        SdcError::InvalidArgument(_) | SdcError::Config(_) => SdcStatus::InvalidArgument,
        SdcError::NodeSolve { .. } => SdcStatus::NodeSolve,
        SdcError::Divergence { .. } => SdcStatus::Divergence,
        SdcError::Singular(_) => SdcStatus::Singular,
        SdcError::Analysis { .. } => SdcStatus::Analysis,
        SdcError::NoExactSolution | SdcError::NotLinear => SdcStatus::NoExactSolution,
        SdcError::Io(_) | SdcError::Csv(_) => SdcStatus::Internal,
    }
}

enum Failure {
    Null(&'static str),
    Core(SdcError),
}

impl From<SdcError> for Failure {
    fn from(e: SdcError) -> Self {
        Failure::Core(e)
    }
}

/// Runs `body`, translating errors and panics into a status and the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> SdcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            SdcStatus::Ok
        }
        Ok(Err(Failure::Null(what))) => {
            set_error(&format!("null pointer: {what}"));
            SdcStatus::NullPointer
        }
        Ok(Err(Failure::Core(e))) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            SdcStatus::Panic
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn slice_mut<'a>(p: *mut f64, n: usize, what: &'static str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

fn check_dim(problem: &SecondOrderIvp, dim: usize) -> Result<(), Failure> {
    if dim != problem.dim() {
        return Err(SdcError::InvalidArgument(format!("problem has dimension {}, got {dim}", problem.dim())).into());
    }
    Ok(())
}

/// Message of the last failed call on this thread; empty after a successful call.
/// The pointer stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn sdc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Writes the `m` nodes and weights of a rule on [0, 1] into `tau` and `weights`.
///
/// # Safety
/// `tau` and `weights` must each point to `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sdc_nodes(family: SdcNodeFamily, m: usize, tau: *mut f64, weights: *mut f64) -> SdcStatus {
    guard(|| {
        let rule = QuadratureRule::new(family.into(), m)?;
        let t = unsafe { slice_mut(tau, m, "tau")? };
        let w = unsafe { slice_mut(weights, m, "weights")? };
        for j in 0..m {
            t[j] = rule.tau(j + 1);
            w[j] = rule.weights[j + 1];
        }
        Ok(())
    })
}

fn boxed_problem(p: SecondOrderIvp, out: *mut *mut SdcProblem) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(SdcProblem { inner: p })) };
    Ok(())
}

/// Damped oscillator `x'' = -kappa x - mu x'`.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_oscillator_new(kappa: f64, mu: f64, out: *mut *mut SdcProblem) -> SdcStatus {
    guard(|| boxed_problem(make_oscillator(kappa, mu)?, out))
}

/// Charged particle in a Penning trap.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_penning_new(
    omega_b: f64,
    omega_e: f64,
    epsilon: f64,
    alpha: f64,
    out: *mut *mut SdcProblem,
) -> SdcStatus {
    guard(|| {
        let params = PenningParams {
            omega_b,
            omega_e,
            epsilon,
            alpha,
            ..PenningParams::default()
        };
        boxed_problem(make_penning(&params)?, out)
    })
}

/// Releases a problem. Null is ignored.
///
/// # Safety
/// `problem` must come from a `*_new` call of this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdc_problem_free(problem: *mut SdcProblem) {
    if !problem.is_null() {
        drop(unsafe { Box::from_raw(problem) });
    }
}

/// Dimension of the position vector, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_problem_dim(problem: *const SdcProblem) -> usize {
    unsafe { problem.as_ref() }.map_or(0, |p| p.inner.dim())
}

/// Force evaluations since creation or the last reset, 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_problem_f_evals(problem: *const SdcProblem) -> u64 {
    unsafe { problem.as_ref() }.map_or(0, |p| p.inner.f_evals())
}

/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_problem_reset_evals(problem: *const SdcProblem) -> SdcStatus {
    guard(|| {
        unsafe { handle(problem, "problem")? }.inner.reset_evals();
        Ok(())
    })
}

/// Exact solution at time `t` from `(x0, v0)`, written to `x_out` and `v_out`.
///
/// # Safety
/// All arrays must hold `dim` doubles; `problem` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_problem_exact(
    problem: *const SdcProblem,
    t: f64,
    x0: *const f64,
    v0: *const f64,
    dim: usize,
    x_out: *mut f64,
    v_out: *mut f64,
) -> SdcStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem")? }.inner;
        check_dim(p, dim)?;
        let (x, v) = p.exact_solution(t, unsafe { slice(x0, dim, "x0")? }, unsafe { slice(v0, dim, "v0")? })?;
        unsafe { slice_mut(x_out, dim, "x_out")? }.copy_from_slice(&x);
        unsafe { slice_mut(v_out, dim, "v_out")? }.copy_from_slice(&v);
        Ok(())
    })
}

/// Sweeper with `m` nodes and `k` sweeps per step. A positive `residual_tol` stops
/// early once the collocation residual drops below it; `seed` is used by the random start.
///
/// # Safety
/// `out` must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sdc_sweeper_new(
    family: SdcNodeFamily,
    m: usize,
    k: usize,
    guess: SdcGuess,
    seed: u64,
    residual_tol: f64,
    out: *mut *mut SdcSweeper,
) -> SdcStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::Null("out"));
        }
        let rule = QuadratureRule::new(family.into(), m)?;
        let guess = match guess {
            SdcGuess::Copy => InitialGuess::CopyInitial,
            SdcGuess::Verlet => InitialGuess::VerletSweep,
            SdcGuess::Random => InitialGuess::Random(seed),
        };
        let stop = if residual_tol > 0.0 {
            StopRule::ResidualTol(residual_tol)
        } else {
            StopRule::FixedK
        };
        let inner = SweeperConfig::new(rule, k).with_initial_guess(guess).with_stop(stop);
        unsafe { *out = Box::into_raw(Box::new(SdcSweeper { inner })) };
        Ok(())
    })
}

/// Releases a sweeper. Null is ignored.
///
/// # Safety
/// `sweeper` must come from [`sdc_sweeper_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sdc_sweeper_free(sweeper: *mut SdcSweeper) {
    if !sweeper.is_null() {
        drop(unsafe { Box::from_raw(sweeper) });
    }
}

/// One SDC step of size `dt`, updating `x` and `v` in place. `info` may be null.
///
/// # Safety
/// `x` and `v` must hold `dim` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn sdc_step(
    problem: *const SdcProblem,
    sweeper: *const SdcSweeper,
    dt: f64,
    x: *mut f64,
    v: *mut f64,
    dim: usize,
    info: *mut SdcStepInfo,
) -> SdcStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem")? }.inner;
        let sw = &unsafe { handle(sweeper, "sweeper")? }.inner;
        check_dim(p, dim)?;
        let x = unsafe { slice_mut(x, dim, "x")? };
        let v = unsafe { slice_mut(v, dim, "v")? };
        let r = sdc::sdc_step(p, x, v, dt, sw)?;
        x.copy_from_slice(&r.x_end);
        v.copy_from_slice(&r.v_end);
        if let Some(out) = unsafe { info.as_mut() } {
            *out = SdcStepInfo {
                f_evals: r.f_evals,
                iterations: r.iterations_used,
                residual: r.final_residual,
            };
        }
        Ok(())
    })
}

/// Integrates from `t0` to `t_end` with step `dt` (the last step is shortened if
/// needed), updating `x` and `v` in place. `f_evals` may be null.
///
/// # Safety
/// `x` and `v` must hold `dim` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn sdc_integrate(
    problem: *const SdcProblem,
    sweeper: *const SdcSweeper,
    t0: f64,
    t_end: f64,
    dt: f64,
    x: *mut f64,
    v: *mut f64,
    dim: usize,
    f_evals: *mut u64,
) -> SdcStatus {
    guard(|| {
        let p = &unsafe { handle(problem, "problem")? }.inner;
        let sw = &unsafe { handle(sweeper, "sweeper")? }.inner;
        check_dim(p, dim)?;
        let x = unsafe { slice_mut(x, dim, "x")? };
        let v = unsafe { slice_mut(v, dim, "v")? };
        let traj = integrate(p, x, v, t0, t_end, dt, sw)?;
        if let Some((xe, ve)) = traj.final_state() {
            x.copy_from_slice(xe);
            v.copy_from_slice(ve);
        }
        if let Some(out) = unsafe { f_evals.as_mut() } {
            *out = traj.total_f_evals;
        }
        Ok(())
    })
}

/// Spectral radius of the chosen matrix for the damped oscillator at `(dt kappa, dt mu)`.
/// `k` is the iteration count for the stability kinds and ignored otherwise.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sdc_stability_rho(
    kind: SdcScanKind,
    k: usize,
    family: SdcNodeFamily,
    m: usize,
    dt_kappa: f64,
    dt_mu: f64,
    out: *mut f64,
) -> SdcStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let rule = QuadratureRule::new(family.into(), m)?;
        *out = rho(scan_kind(kind, k), dt_kappa, dt_mu, &rule)?;
        Ok(())
    })
}

/// Largest stable `dt kappa` on the undamped axis, to 0.01.
///
/// # Safety
/// `out` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn sdc_stability_limit(
    kind: SdcScanKind,
    k: usize,
    family: SdcNodeFamily,
    m: usize,
    out: *mut f64,
) -> SdcStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        let rule = QuadratureRule::new(family.into(), m)?;
        *out = stability_limit(scan_kind(kind, k), &rule);
        Ok(())
    })
}
