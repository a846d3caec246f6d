//! C interface to `kirchhoff-qp`.
//!
//! Objects are opaque handles created by `kqp_*_new`/`kqp_*_from_*` and released
//! with the matching `kqp_*_free`. Every fallible call returns a [`KqpStatus`];
//! on failure [`kqp_last_error`] gives a message for the calling thread.

use kirchhoff_qp::config::RunConfig;
use kirchhoff_qp::diophantine::FrequencyData;
use kirchhoff_qp::kirchhoff::{residual, ProblemData};
use kirchhoff_qp::nash_moser::{solve, ExponentSet, NewtonOptions, SolveOutcome};
use kirchhoff_qp::{KqpError, ModeBox, TorusFunction, C64};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KqpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    MeanNotZero = 5,
    SmallDivisor = 6,
    Domain = 7,
    NonPositiveArgument = 8,
    NoConvergence = 9,
    Singular = 10,
    StepFailed = 11,
    BadParameter = 12,
    ExponentViolation = 13,
    Panic = 99,
}

impl From<&KqpError> for KqpStatus {
    fn from(e: &KqpError) -> Self {
        match e {
            KqpError::MeanNotZero(_) => KqpStatus::MeanNotZero,
            KqpError::SmallDivisorUnderflow { .. } => KqpStatus::SmallDivisor,
            KqpError::DomainError(_) => KqpStatus::Domain,
            KqpError::NonPositiveArgument(_) => KqpStatus::NonPositiveArgument,
            KqpError::NoConvergence(_) => KqpStatus::NoConvergence,
            KqpError::Singular(_) => KqpStatus::Singular,
            KqpError::StepFailed(_) => KqpStatus::StepFailed,
            KqpError::BadParameter(_) => KqpStatus::BadParameter,
            KqpError::ExponentViolation(_) => KqpStatus::ExponentViolation,
            KqpError::Config(_) => KqpStatus::Config,
            KqpError::Io(_) => KqpStatus::Io,
        }
    }
}

/// A real function on T^nu x T^d stored by Fourier coefficients.
pub struct KqpFunction(TorusFunction);

/// Problem data plus solver settings.
pub struct KqpProblem {
    pd: ProblemData,
    exponents: ExponentSet,
    newton: NewtonOptions,
}

/// Outcome of [`kqp_solve`].
pub struct KqpSolveResult {
    out: SolveOutcome,
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

fn fail(status: KqpStatus, msg: impl Into<String>) -> KqpStatus {
    set_error(msg);
    status
}

fn from_err(e: KqpError) -> KqpStatus {
    fail((&e).into(), e.to_string())
}

fn guard<F: FnOnce() -> KqpStatus>(f: F) -> KqpStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(KqpStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, n: usize) -> Option<&'a [T]> {
    if n == 0 {
        Some(&[])
    } else if p.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(p, n))
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        None
    } else {
        CStr::from_ptr(p).to_str().ok()
    }
}

fn into_handle<T>(v: T, out: *mut *mut T) {
    unsafe { *out = Box::into_raw(Box::new(v)) };
}

unsafe fn free_handle<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn kqp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map(|s| s.as_ptr()).unwrap_or(ptr::null()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kqp_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr() as *const c_char
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Zero function on the box |l|_inf <= lphi, |j|_inf <= lx.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_new(nu: usize, d: usize, lphi: usize, lx: usize, out: *mut *mut KqpFunction) -> KqpStatus {
    guard(|| {
        if out.is_null() {
            return fail(KqpStatus::NullPointer, "out is NULL");
        }
        if nu + d == 0 || nu + d > kirchhoff_qp::fourier::MAX_DIM {
            return fail(KqpStatus::InvalidArgument, "nu + d out of range");
        }
        into_handle(KqpFunction(TorusFunction::zeros(nu, d, lphi, lx)), out);
        KqpStatus::Ok
    })
}

/// Parses the JSON mode list used by the command line tool.
///
/// # Safety
/// `json` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_from_json(json: *const c_char, out: *mut *mut KqpFunction) -> KqpStatus {
    guard(|| {
        let Some(s) = c_str(json) else { return fail(KqpStatus::NullPointer, "json is NULL or not UTF-8") };
        if out.is_null() {
            return fail(KqpStatus::NullPointer, "out is NULL");
        }
        match TorusFunction::from_json(s) {
            Ok(f) => {
                into_handle(KqpFunction(f), out);
                KqpStatus::Ok
            }
            Err(e) => fail(KqpStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Serialises to JSON; free the string with [`kqp_string_free`].
///
/// # Safety
/// `f` must be a live handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_to_json(f: *const KqpFunction, out: *mut *mut c_char) -> KqpStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        *out = CString::new((*f).0.to_json()).expect("json has no NUL").into_raw();
        KqpStatus::Ok
    })
}

/// Adds re + i im at (l, j) and its conjugate at (-l, -j), so the function stays real.
///
/// # Safety
/// `ell` has `nu` entries and `j` has `d` entries.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_add_mode(f: *mut KqpFunction, ell: *const i32, j: *const i32, re: f64, im: f64) -> KqpStatus {
    guard(|| {
        if f.is_null() {
            return fail(KqpStatus::NullPointer, "f is NULL");
        }
        let tf = &mut (*f).0;
        let (Some(l), Some(jj)) = (slice(ell, tf.nu()), slice(j, tf.d())) else {
            return fail(KqpStatus::NullPointer, "index array is NULL");
        };
        let bx = tf.mode_box();
        if l.iter().any(|c| c.unsigned_abs() as usize > bx.lphi) || jj.iter().any(|c| c.unsigned_abs() as usize > bx.lx) {
            return fail(KqpStatus::InvalidArgument, "index outside the box");
        }
        tf.add_pair(l, jj, C64::new(re, im));
        KqpStatus::Ok
    })
}

/// Coefficient at (l, j); zero outside the box.
///
/// # Safety
/// Pointers must be valid; `ell` has `nu` entries and `j` has `d` entries.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_get_mode(f: *const KqpFunction, ell: *const i32, j: *const i32, re: *mut f64, im: *mut f64) -> KqpStatus {
    guard(|| {
        if f.is_null() || re.is_null() || im.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        let tf = &(*f).0;
        let (Some(l), Some(jj)) = (slice(ell, tf.nu()), slice(j, tf.d())) else {
            return fail(KqpStatus::NullPointer, "index array is NULL");
        };
        let v = tf.get(l, jj);
        *re = v.re;
        *im = v.im;
        KqpStatus::Ok
    })
}

/// Value at (phi, x).
///
/// # Safety
/// `phi` has `nu` entries, `x` has `d` entries, `out` is valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_eval(f: *const KqpFunction, phi: *const f64, x: *const f64, out: *mut f64) -> KqpStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        let tf = &(*f).0;
        let (Some(p), Some(xx)) = (slice(phi, tf.nu()), slice(x, tf.d())) else {
            return fail(KqpStatus::NullPointer, "point array is NULL");
        };
        *out = tf.eval(p, xx);
        KqpStatus::Ok
    })
}

/// Sobolev norm with weight max(1, |k|_inf)^s.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_sobolev_norm(f: *const KqpFunction, s: f64, out: *mut f64) -> KqpStatus {
    guard(|| {
        if f.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        *out = (*f).0.sobolev_norm(s);
        KqpStatus::Ok
    })
}

/// # Safety
/// `f` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kqp_function_free(f: *mut KqpFunction) {
    free_handle(f)
}

/// Problem from explicit data. The forcing is copied; solver settings get defaults
/// (box 8, N0 = 8, 8 steps, tol 1e-9, greedy exponents with tau = 3).
///
/// # Safety
/// `omega_bar` has `nu` entries (nu taken from the forcing); pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_problem_new(omega_bar: *const f64, gamma0: f64, epsilon: f64, forcing: *const KqpFunction, out: *mut *mut KqpProblem) -> KqpStatus {
    guard(|| {
        if forcing.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        let f = (*forcing).0.clone();
        let (nu, d) = (f.nu(), f.d());
        let Some(w) = slice(omega_bar, nu) else { return fail(KqpStatus::NullPointer, "omega_bar is NULL") };
        let pd = match FrequencyData::new(w.to_vec(), gamma0).and_then(|fd| ProblemData::new(fd, epsilon, f)) {
            Ok(pd) => pd,
            Err(e) => return from_err(e),
        };
        let newton = NewtonOptions { n0: 8.0, max_steps: 8, tol: 1e-9, work: ModeBox::new(nu, d, 8, 8) };
        into_handle(KqpProblem { pd, exponents: ExponentSet::greedy(nu, d, 3.0), newton }, out);
        KqpStatus::Ok
    })
}

/// Problem and solver settings from a TOML configuration file.
///
/// # Safety
/// `path` must be NUL-terminated; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_problem_from_config(path: *const c_char, override_exponents: bool, out: *mut *mut KqpProblem) -> KqpStatus {
    guard(|| {
        let Some(p) = c_str(path) else { return fail(KqpStatus::NullPointer, "path is NULL or not UTF-8") };
        if out.is_null() {
            return fail(KqpStatus::NullPointer, "out is NULL");
        }
        let res = RunConfig::load(Path::new(p)).and_then(|cfg| {
            let exponents = cfg.checked_exponents(override_exponents)?;
            Ok(KqpProblem { pd: cfg.problem_data()?, exponents, newton: cfg.newton_options() })
        });
        match res {
            Ok(pr) => {
                into_handle(pr, out);
                KqpStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Overrides the Newton settings.
///
/// # Safety
/// `p` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kqp_problem_set_numerics(p: *mut KqpProblem, box_phi: usize, box_x: usize, n0: f64, max_steps: u32, tol: f64) -> KqpStatus {
    guard(|| {
        if p.is_null() {
            return fail(KqpStatus::NullPointer, "p is NULL");
        }
        if !(n0 > 1.0) || !(tol >= 0.0) {
            return fail(KqpStatus::InvalidArgument, "need N0 > 1 and tol >= 0");
        }
        let pr = &mut *p;
        pr.newton = NewtonOptions { n0, max_steps, tol, work: ModeBox::new(pr.pd.fd.nu, pr.pd.d, box_phi, box_x) };
        KqpStatus::Ok
    })
}

/// # Safety
/// `p` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_problem_free(p: *mut KqpProblem) {
    free_handle(p)
}

/// ||F(lambda, u)||_s for a zero-x-mean `u`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_residual_norm(p: *const KqpProblem, lambda: f64, u: *const KqpFunction, s: f64, out: *mut f64) -> KqpStatus {
    guard(|| {
        if p.is_null() || u.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        match residual(&(*p).pd, lambda, &(*u).0) {
            Ok(r) => {
                *out = r.sobolev_norm(s);
                KqpStatus::Ok
            }
            Err(e) => from_err(e),
        }
    })
}

/// Runs the Newton iteration. Returns `Ok` with a result handle whenever the run
/// finished (converged or not); a failed step is reported by [`kqp_result_status`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_solve(p: *const KqpProblem, lambda: f64, out: *mut *mut KqpSolveResult) -> KqpStatus {
    guard(|| {
        if p.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        if !(lambda > 0.0) {
            return fail(KqpStatus::InvalidArgument, "lambda must be positive");
        }
        let pr = &*p;
        into_handle(KqpSolveResult { out: solve(&pr.pd, lambda, &pr.exponents, &pr.newton) }, out);
        KqpStatus::Ok
    })
}

/// 1 if the residual reached the tolerance.
///
/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_converged(r: *const KqpSolveResult) -> bool {
    !r.is_null() && (*r).out.converged
}

/// Status of the failing step (sets the last error), or `Ok`.
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_status(r: *const KqpSolveResult) -> KqpStatus {
    guard(|| {
        if r.is_null() {
            return fail(KqpStatus::NullPointer, "r is NULL");
        }
        match &(*r).out.failure {
            Some(e) => fail(e.into(), e.to_string()),
            None => KqpStatus::Ok,
        }
    })
}

/// Number of Newton steps taken.
///
/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_steps(r: *const KqpSolveResult) -> usize {
    if r.is_null() {
        0
    } else {
        (*r).out.trace.len().saturating_sub(1)
    }
}

/// Final residual ||F||_{s0}; NaN if no residual was computed.
///
/// # Safety
/// `r` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_residual(r: *const KqpSolveResult) -> f64 {
    if r.is_null() {
        return f64::NAN;
    }
    (*r).out.trace.last().map(|t| t.residual_s0).unwrap_or(f64::NAN)
}

/// Copy of the computed u; free with [`kqp_function_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_solution(r: *const KqpSolveResult, out: *mut *mut KqpFunction) -> KqpStatus {
    guard(|| {
        if r.is_null() || out.is_null() {
            return fail(KqpStatus::NullPointer, "NULL argument");
        }
        into_handle(KqpFunction((*r).out.u.clone()), out);
        KqpStatus::Ok
    })
}

/// # Safety
/// `r` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn kqp_result_free(r: *mut KqpSolveResult) {
    free_handle(r)
}
