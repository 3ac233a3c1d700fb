//! C ABI over the `ccama` toolkit.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible entry point returns a
//! [`CcamaStatus`]; the message for the most recent failure on the calling
//! thread is available from [`ccama_last_error`]. Matrices are exchanged as
//! dense row-major `double` buffers.
// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ccama::admm::{solve_admm_with, AdmmOptions, StepPolicy};
use ccama::ama::{default_fixed_step, solve_ama_with, AmaOptions, StepMode};
use ccama::decomposition::signature;
use ccama::linops::OperatorBundle;
use ccama::lyapunov::lyapunov_solve;
use ccama::problem::{gen_msd, ProblemInstance};
use ccama::solver::{initial_dual, SolveResult, StopRule};
use ccama::{CcError, Mat};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcamaStatus {
    Ok = 0,
    /// The solver stopped at its iteration cap; the solution handle is still valid.
    NotConverged = 2,
    InvalidInput = 3,
    NumericalFailure = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Opaque problem instance.
pub struct CcamaInstance {
    inner: ProblemInstance,
}

/// Opaque solver result.
pub struct CcamaSolution {
    inner: SolveResult,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CcamaStepMode {
    BbBacktracking = 0,
    Backtracking = 1,
    /// Uses `rho` as the constant step; `rho <= 0` picks the Lipschitz-based default.
    Fixed = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcamaAmaOptions {
    pub eps_gap: f64,
    pub eps_primal: f64,
    pub beta: f64,
    pub rho: f64,
    pub max_iter: usize,
    pub max_backtracks: usize,
    pub step: CcamaStepMode,
    /// Nonzero: stop when either tolerance holds instead of both.
    pub stop_either: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CcamaAdmmOptions {
    pub rho: f64,
    pub mu_safety: f64,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub eps_gap: f64,
    pub eps_primal: f64,
    pub max_iter: usize,
    /// Nonzero enables residual balancing of `rho`.
    pub residual_balancing: i32,
    pub stop_either: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CcamaSignature {
    pub pi: usize,
    pub nu: usize,
    pub delta: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &CcError) -> CcamaStatus {
    match err.exit_code() {
        3 => CcamaStatus::InvalidInput,
        _ => CcamaStatus::NumericalFailure,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<CcamaStatus, (CcamaStatus, String)>) -> CcamaStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(s)) => s,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CcamaStatus::Panic
        }
    }
}

fn lift<T>(r: ccama::Result<T>) -> Result<T, (CcamaStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (CcamaStatus, String) {
    (CcamaStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize, what: &str) -> Result<Mat, (CcamaStatus, String)> {
    if data.is_null() {
        return Err(null(what));
    }
    let s = std::slice::from_raw_parts(data, rows * cols);
    Ok(Mat::from_row_slice(rows, cols, s))
}

unsafe fn write_matrix(m: &Mat, out: *mut f64, len: usize) -> Result<CcamaStatus, (CcamaStatus, String)> {
    if out.is_null() {
        return Err(null("output buffer"));
    }
    let need = m.nrows() * m.ncols();
    if len < need {
        return Err((CcamaStatus::BufferTooSmall, format!("buffer holds {len}, need {need}")));
    }
    let dst = std::slice::from_raw_parts_mut(out, need);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dst[i * m.ncols() + j] = m[(i, j)];
        }
    }
    Ok(CcamaStatus::Ok)
}

/// Message for the last failure on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ccama_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ccama_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn ccama_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---------------------------------------------------------------- instances

/// Parses an instance from JSON text.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccama_instance_from_json(json: *const c_char, out: *mut *mut CcamaInstance) -> CcamaStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|_| (CcamaStatus::InvalidInput, "json is not UTF-8".to_string()))?;
        let inner = lift(ProblemInstance::from_json(text))?;
        *out = Box::into_raw(Box::new(CcamaInstance { inner }));
        Ok(CcamaStatus::Ok)
    })
}

/// Serializes an instance; release the result with [`ccama_string_free`].
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccama_instance_to_json(inst: *const CcamaInstance, out: *mut *mut c_char) -> CcamaStatus {
    guard(|| {
        let inst = inst.as_ref().ok_or_else(|| null("instance"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CString::new(inst.inner.to_json()).map_err(|e| (CcamaStatus::NumericalFailure, e.to_string()))?;
        *out = s.into_raw();
        Ok(CcamaStatus::Ok)
    })
}

/// Builds the mass-spring-damper benchmark with `masses` masses.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ccama_gen_msd(masses: usize, gamma: f64, out: *mut *mut CcamaInstance) -> CcamaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let gt = lift(gen_msd(masses, gamma, None))?;
        *out = Box::into_raw(Box::new(CcamaInstance { inner: gt.instance }));
        Ok(CcamaStatus::Ok)
    })
}

/// State dimension, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_instance_dim(inst: *const CcamaInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.n())
}

/// Replaces the regularization weight.
///
/// # Safety
/// `inst` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_instance_set_gamma(inst: *mut CcamaInstance, gamma: f64) -> CcamaStatus {
    guard(|| {
        let inst = inst.as_mut().ok_or_else(|| null("instance"))?;
        inst.inner = lift(inst.inner.with_gamma(gamma))?;
        Ok(CcamaStatus::Ok)
    })
}

/// # Safety
/// `inst` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccama_instance_free(inst: *mut CcamaInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

// ---------------------------------------------------------------- solvers

#[no_mangle]
pub extern "C" fn ccama_ama_options_default() -> CcamaAmaOptions {
    let d = AmaOptions::default();
    CcamaAmaOptions {
        eps_gap: d.eps_gap,
        eps_primal: d.eps_primal,
        beta: d.beta,
        rho: d.rho0,
        max_iter: d.max_iter,
        max_backtracks: d.max_backtracks,
        step: CcamaStepMode::BbBacktracking,
        stop_either: 0,
    }
}

#[no_mangle]
pub extern "C" fn ccama_admm_options_default() -> CcamaAdmmOptions {
    let d = AdmmOptions::default();
    CcamaAdmmOptions {
        rho: d.rho,
        mu_safety: d.mu_safety,
        inner_tol: d.inner_tol,
        inner_max: d.inner_max,
        eps_gap: d.eps_gap,
        eps_primal: d.eps_primal,
        max_iter: d.max_iter,
        residual_balancing: 1,
        stop_either: 0,
    }
}

fn stop_rule(either: i32) -> StopRule {
    if either != 0 {
        StopRule::Either
    } else {
        StopRule::Both
    }
}

unsafe fn finish_solve(r: SolveResult, out: *mut *mut CcamaSolution) -> CcamaStatus {
    let status = if r.converged { CcamaStatus::Ok } else { CcamaStatus::NotConverged };
    *out = Box::into_raw(Box::new(CcamaSolution { inner: r }));
    status
}

/// Runs AMA. `opts` may be null for defaults. On `Ok` or `NotConverged`
/// `*out` receives a solution handle.
///
/// # Safety
/// `inst` must be a live handle, `opts` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ccama_solve_ama(
    inst: *const CcamaInstance,
    opts: *const CcamaAmaOptions,
    out: *mut *mut CcamaSolution,
) -> CcamaStatus {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("instance"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| ccama_ama_options_default());
        let bundle = lift(OperatorBundle::from_instance(inst))?;
        let step = match o.step {
            CcamaStepMode::BbBacktracking => StepMode::BbBacktracking,
            CcamaStepMode::Backtracking => StepMode::Backtracking,
            CcamaStepMode::Fixed if o.rho > 0.0 => StepMode::Fixed(o.rho),
            CcamaStepMode::Fixed => {
                let y0 = lift(initial_dual(&bundle, inst.gamma))?;
                StepMode::Fixed(default_fixed_step(&bundle, &y0))
            }
        };
        let rho0 = match step {
            StepMode::Fixed(r) => r,
            _ => o.rho,
        };
        let options = AmaOptions {
            eps_gap: o.eps_gap,
            eps_primal: o.eps_primal,
            beta: o.beta,
            rho0,
            max_iter: o.max_iter,
            max_backtracks: o.max_backtracks,
            step,
            stop: stop_rule(o.stop_either),
            record_iterates: false,
        };
        let r = lift(solve_ama_with(&bundle, inst, &options, None))?;
        Ok(finish_solve(r, out))
    })
}

/// Runs ADMM. Same conventions as [`ccama_solve_ama`].
///
/// # Safety
/// `inst` must be a live handle, `opts` null or valid, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ccama_solve_admm(
    inst: *const CcamaInstance,
    opts: *const CcamaAdmmOptions,
    out: *mut *mut CcamaSolution,
) -> CcamaStatus {
    guard(|| {
        let inst = &inst.as_ref().ok_or_else(|| null("instance"))?.inner;
        if out.is_null() {
            return Err(null("out"));
        }
        let o = opts.as_ref().copied().unwrap_or_else(|| ccama_admm_options_default());
        let bundle = lift(OperatorBundle::from_instance(inst))?;
        let options = AdmmOptions {
            rho: o.rho,
            mu_safety: o.mu_safety,
            inner_tol: o.inner_tol,
            inner_max: o.inner_max,
            eps_gap: o.eps_gap,
            eps_primal: o.eps_primal,
            max_iter: o.max_iter,
            step_policy: if o.residual_balancing != 0 {
                StepPolicy::ResidualBalancing
            } else {
                StepPolicy::Constant
            },
            stop: stop_rule(o.stop_either),
            record_iterates: false,
        };
        let r = lift(solve_admm_with(&bundle, inst, &options))?;
        Ok(finish_solve(r, out))
    })
}

// ---------------------------------------------------------------- solutions

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_dim(sol: *const CcamaSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.inner.x.nrows())
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_converged(sol: *const CcamaSolution) -> i32 {
    sol.as_ref().map_or(0, |s| s.inner.converged as i32)
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_iterations(sol: *const CcamaSolution) -> usize {
    sol.as_ref().map_or(0, |s| s.inner.iterations)
}

/// Final duality gap, NaN when the last dual point was infeasible.
///
/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_gap(sol: *const CcamaSolution) -> f64 {
    sol.as_ref().and_then(|s| s.inner.gap).unwrap_or(f64::NAN)
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_primal_residual(sol: *const CcamaSolution) -> f64 {
    sol.as_ref().map_or(f64::NAN, |s| s.inner.primal_residual)
}

/// # Safety
/// `sol` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_dual_objective(sol: *const CcamaSolution) -> f64 {
    sol.as_ref().and_then(|s| s.inner.dual_objective()).unwrap_or(f64::NAN)
}

unsafe fn copy_out(sol: *const CcamaSolution, out: *mut f64, len: usize, pick: fn(&SolveResult) -> &Mat) -> CcamaStatus {
    guard(|| {
        let s = &sol.as_ref().ok_or_else(|| null("solution"))?.inner;
        write_matrix(pick(s), out, len)
    })
}

/// Copies `X` (n×n, row-major).
///
/// # Safety
/// `sol` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_x(sol: *const CcamaSolution, out: *mut f64, len: usize) -> CcamaStatus {
    copy_out(sol, out, len, |s| &s.x)
}

/// Copies `Z` (n×n, row-major).
///
/// # Safety
/// `sol` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_z(sol: *const CcamaSolution, out: *mut f64, len: usize) -> CcamaStatus {
    copy_out(sol, out, len, |s| &s.z)
}

/// Copies the dual block `Y1` (n×n).
///
/// # Safety
/// `sol` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_y1(sol: *const CcamaSolution, out: *mut f64, len: usize) -> CcamaStatus {
    copy_out(sol, out, len, |s| &s.y.y1)
}

/// Copies the dual block `Y2` (p×p).
///
/// # Safety
/// `sol` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_y2(sol: *const CcamaSolution, out: *mut f64, len: usize) -> CcamaStatus {
    copy_out(sol, out, len, |s| &s.y.y2)
}

/// # Safety
/// `sol` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ccama_solution_free(sol: *mut CcamaSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

// ---------------------------------------------------------------- helpers

/// Inertia of a symmetric n×n matrix with eigenvalues below
/// `zero_tol·‖Z‖₂` counted as zero.
///
/// # Safety
/// `z` must hold n·n doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ccama_signature(z: *const f64, n: usize, zero_tol: f64, out: *mut CcamaSignature) -> CcamaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(zero_tol >= 0.0) {
            return Err((CcamaStatus::InvalidInput, "zero_tol must be nonnegative".into()));
        }
        let z = read_matrix(z, n, n, "z")?;
        let s = signature(&z, zero_tol);
        *out = CcamaSignature {
            pi: s.pi,
            nu: s.nu,
            delta: s.delta,
        };
        Ok(CcamaStatus::Ok)
    })
}

/// Solves `A X + X Aᵀ + Q = 0` for Hurwitz `A`; all buffers are n×n row-major.
///
/// # Safety
/// `a` and `q` must hold n·n doubles and `x_out` must have room for n·n.
#[no_mangle]
pub unsafe extern "C" fn ccama_lyapunov_solve(a: *const f64, q: *const f64, n: usize, x_out: *mut f64) -> CcamaStatus {
    guard(|| {
        let a = read_matrix(a, n, n, "a")?;
        let q = read_matrix(q, n, n, "q")?;
        let x = lift(lyapunov_solve(&a, &q))?;
        write_matrix(&x, x_out, n * n)
    })
}
