//! C interface to `stlsynth`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_parse`
//! style constructors and released with the matching `*_free`. Every
//! fallible call returns a [`StlsynthCode`]; on failure a description is
//! kept per thread and read with [`stlsynth_last_error`]. Panics are caught
//! and reported as [`StlsynthCode::Panic`].
//!
//! Signals are passed as flat row-major arrays: sample `t`, channel `c` is
//! at index `t * dim + c`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stlsynth::lti::{builtin_model, generate_data, read_trajectory_csv, InputBox, Signal, Trajectory};
use stlsynth::milp::CostKind;
use stlsynth::stl::{parse, StlFormula};
use stlsynth::synthesis::{self, SynthesisConfig, SynthesisResult, SynthesisStatus, Verdict, DEFAULT_INIT_TOL};
use stlsynth::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlsynthCode {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Parse = 4,
    Io = 5,
    Numerical = 6,
    InconsistentInitialization = 7,
    InsufficientData = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Outcome of a synthesis.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlsynthStatus {
    Feasible = 0,
    Infeasible = 1,
    /// A solver limit stopped the search before anything was found.
    Unknown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StlsynthCost {
    InputNorm = 0,
    OutputNorm = 1,
}

/// Synthesis settings; start from [`stlsynth_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StlsynthOptions {
    /// Upper bound on the system order, used for the excitation check.
    pub n_x_bound: usize,
    /// A [`StlsynthCost`] value.
    pub cost: i32,
    /// Input bounds, the same on every channel.
    pub u_lo: f64,
    pub u_hi: f64,
    pub big_m: f64,
    pub eps: f64,
    /// Wall-clock limit of the solver in seconds.
    pub time_limit: f64,
}

/// Measured or initialization data.
pub struct StlsynthTrajectory(Trajectory);

pub struct StlsynthFormula(StlFormula);

pub struct StlsynthResult(SynthesisResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn code_of(e: &Error) -> StlsynthCode {
    match e {
        Error::Dimension(_) => StlsynthCode::Dimension,
        Error::Parse(_) => StlsynthCode::Parse,
        Error::Io(_) | Error::Format { .. } => StlsynthCode::Io,
        Error::Numerical(_) | Error::NonFinite(_) => StlsynthCode::Numerical,
        Error::InconsistentInitialization { .. } | Error::ContinuationInfeasible { .. } => {
            StlsynthCode::InconsistentInitialization
        }
        Error::InsufficientData { .. } => StlsynthCode::InsufficientData,
        _ => StlsynthCode::InvalidArgument,
    }
}

struct Fail(StlsynthCode, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(StlsynthCode::NullPointer, format!("`{what}` is null"))
}

/// Runs `f`, recording its error and turning panics into a code.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> StlsynthCode {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            StlsynthCode::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            StlsynthCode::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(StlsynthCode::InvalidArgument, format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(what)),
        (false, n) => Ok(std::slice::from_raw_parts(p, n)),
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Copies `values` into `buf` and stores the count in `*written`. A buffer
/// that is too small is left untouched and `*written` holds the size needed.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize, written: *mut usize) -> Result<(), Fail> {
    if !written.is_null() {
        *written = values.len();
    }
    if values.len() > cap {
        return Err(Fail(StlsynthCode::BufferTooSmall, format!("need {} values, buffer holds {cap}", values.len())));
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buf"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn stlsynth_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn stlsynth_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn stlsynth_options_default() -> StlsynthOptions {
    let enc = stlsynth::milp::EncodingParams::default();
    StlsynthOptions {
        n_x_bound: 1,
        cost: StlsynthCost::InputNorm as i32,
        u_lo: -1.0,
        u_hi: 1.0,
        big_m: enc.big_m,
        eps: enc.eps,
        time_limit: stlsynth::solver::SolverParams::default().time_limit,
    }
}

/// Builds a trajectory from row-major `u` (`len × n_u`) and `y`
/// (`len × n_y`).
#[no_mangle]
pub unsafe extern "C" fn stlsynth_trajectory_new(
    n_u: usize,
    n_y: usize,
    len: usize,
    u: *const f64,
    y: *const f64,
    out: *mut *mut StlsynthTrajectory,
) -> StlsynthCode {
    guard(|| {
        let u = Signal::new(n_u, slice_arg(u, n_u * len, "u")?.to_vec())?;
        let y = Signal::new(n_y, slice_arg(y, n_y * len, "y")?.to_vec())?;
        out_arg(out, StlsynthTrajectory(Trajectory::new(u, y, None)?))
    })
}

/// Reads a `t,u1..,y1..` CSV file.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_trajectory_read_csv(
    path: *const c_char,
    out: *mut *mut StlsynthTrajectory,
) -> StlsynthCode {
    guard(|| {
        let traj = read_trajectory_csv(str_arg(path, "path")?)?;
        out_arg(out, StlsynthTrajectory(traj))
    })
}

/// Simulates the built-in system `name` from rest under i.i.d. uniform
/// inputs in `[u_lo, u_hi]`. Systems with a disturbance channel get zeros.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_generate_data(
    name: *const c_char,
    steps: usize,
    u_lo: f64,
    u_hi: f64,
    seed: u64,
    out: *mut *mut StlsynthTrajectory,
) -> StlsynthCode {
    guard(|| {
        let model = builtin_model(str_arg(name, "name")?)?;
        let input_box = InputBox::uniform(model.n_u(), u_lo, u_hi)?;
        out_arg(out, StlsynthTrajectory(generate_data(&model, steps, &input_box, seed, None)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stlsynth_trajectory_len(traj: *const StlsynthTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn stlsynth_trajectory_free(traj: *mut StlsynthTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Parses a formula over outputs `y1..y{n_y}`.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_formula_parse(
    src: *const c_char,
    n_y: usize,
    out: *mut *mut StlsynthFormula,
) -> StlsynthCode {
    guard(|| {
        let phi = parse(str_arg(src, "src")?, n_y).map_err(Error::from)?;
        out_arg(out, StlsynthFormula(phi))
    })
}

/// Number of steps after 0 the formula reads; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_formula_horizon(phi: *const StlsynthFormula) -> usize {
    phi.as_ref().map_or(0, |f| synthesis::compute_l(&f.0))
}

#[no_mangle]
pub unsafe extern "C" fn stlsynth_formula_free(phi: *mut StlsynthFormula) {
    if !phi.is_null() {
        drop(Box::from_raw(phi));
    }
}

/// Synthesizes inputs for `phi` from `data`, starting after `w_ini`.
///
/// An infeasible problem is a successful call whose result reports
/// [`StlsynthStatus::Infeasible`].
#[no_mangle]
pub unsafe extern "C" fn stlsynth_synthesize(
    data: *const StlsynthTrajectory,
    w_ini: *const StlsynthTrajectory,
    phi: *const StlsynthFormula,
    options: *const StlsynthOptions,
    out: *mut *mut StlsynthResult,
) -> StlsynthCode {
    guard(|| {
        let data = &ref_arg(data, "data")?.0;
        let w_ini = &ref_arg(w_ini, "w_ini")?.0;
        let phi = &ref_arg(phi, "phi")?.0;
        let o = ref_arg(options, "options")?;
        let mut cfg = SynthesisConfig::new(o.n_x_bound, InputBox::uniform(data.n_u(), o.u_lo, o.u_hi)?);
        cfg.t_ini = w_ini.len();
        cfg.cost = match o.cost {
            c if c == StlsynthCost::InputNorm as i32 => CostKind::InputNorm,
            c if c == StlsynthCost::OutputNorm as i32 => CostKind::OutputNorm,
            c => return Err(Fail(StlsynthCode::InvalidArgument, format!("unknown cost {c}"))),
        };
        cfg.encoding.big_m = o.big_m;
        cfg.encoding.eps = o.eps;
        cfg.solver.time_limit = o.time_limit;
        out_arg(out, StlsynthResult(synthesis::synthesize(data, w_ini, phi, &cfg)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_status(res: *const StlsynthResult) -> StlsynthStatus {
    match res.as_ref().map(|r| r.0.status) {
        Some(SynthesisStatus::Feasible) => StlsynthStatus::Feasible,
        Some(SynthesisStatus::Infeasible) => StlsynthStatus::Infeasible,
        Some(SynthesisStatus::Unknown) | None => StlsynthStatus::Unknown,
    }
}

/// Whether optimality (or infeasibility) was proven.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_optimal(res: *const StlsynthResult) -> bool {
    res.as_ref().is_some_and(|r| r.0.optimal)
}

/// Objective of the plan; NaN without one.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_objective(res: *const StlsynthResult) -> f64 {
    res.as_ref().and_then(|r| r.0.plan.as_ref()).map_or(f64::NAN, |p| p.objective)
}

/// Plan length minus one.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_horizon(res: *const StlsynthResult) -> usize {
    res.as_ref().map_or(0, |r| r.0.horizon)
}

/// Copies the planned inputs (row-major) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_inputs(
    res: *const StlsynthResult,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> StlsynthCode {
    guard(|| {
        let plan = ref_arg(res, "res")?.0.plan.as_ref();
        copy_out(plan.map_or(&[][..], |p| p.u_opt.as_slice()), buf, cap, written)
    })
}

/// Copies the predicted outputs (row-major) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_outputs(
    res: *const StlsynthResult,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> StlsynthCode {
    guard(|| {
        let plan = ref_arg(res, "res")?.0.plan.as_ref();
        copy_out(plan.map_or(&[][..], |p| p.y_pred.as_slice()), buf, cap, written)
    })
}

/// The initialization the plan starts from: the given one after projection
/// onto the data span. Pass it to [`stlsynth_verify`].
#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_initialization(
    res: *const StlsynthResult,
    out: *mut *mut StlsynthTrajectory,
) -> StlsynthCode {
    guard(|| out_arg(out, StlsynthTrajectory(ref_arg(res, "res")?.0.w_ini.clone())))
}

#[no_mangle]
pub unsafe extern "C" fn stlsynth_result_free(res: *mut StlsynthResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}

/// Applies `len` input samples to the built-in system `name` after `w_ini`
/// and monitors `phi`. `*t_fail` is set to the earliest failing step, or
/// `SIZE_MAX` when the formula holds.
#[no_mangle]
pub unsafe extern "C" fn stlsynth_verify(
    name: *const c_char,
    w_ini: *const StlsynthTrajectory,
    u: *const f64,
    len: usize,
    phi: *const StlsynthFormula,
    satisfied: *mut bool,
    t_fail: *mut usize,
) -> StlsynthCode {
    guard(|| {
        let model = builtin_model(str_arg(name, "name")?)?;
        let w_ini = &ref_arg(w_ini, "w_ini")?.0;
        let phi = &ref_arg(phi, "phi")?.0;
        let u = Signal::new(model.n_u(), slice_arg(u, len * model.n_u(), "u")?.to_vec())?;
        if satisfied.is_null() {
            return Err(null("satisfied"));
        }
        let cl = synthesis::verify_closed_loop(&model, w_ini, &u, None, phi, DEFAULT_INIT_TOL)?;
        *satisfied = cl.verdict == Verdict::Satisfied;
        if !t_fail.is_null() {
            *t_fail = match cl.verdict {
                Verdict::Satisfied => usize::MAX,
                Verdict::Violated { t_fail } => t_fail,
            };
        }
        Ok(())
    })
}
