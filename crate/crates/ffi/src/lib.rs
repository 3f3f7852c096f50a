//! C interface to the gorom library.
//!
//! Every fallible function returns a [`GoromStatus`]. On failure a message is
//! stored per thread and can be read with [`gorom_last_error`]. Handles are
//! opaque; release them with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use gorom::estimators::{estimate, EstimatorConfig};
use gorom::greedy::{self, GreedyConfig};
use gorom::model::bundle::{bundle_hash, load_bundle, save_bundle};
use gorom::model::FullOrderModel;
use gorom::problems::{self, ProblemConfig, ProblemKind};
use gorom::projectors::{Method, ReducedModel};
use gorom::store::{load_spaces, save_spaces, save_trace};
use gorom::Error;

/// Result codes.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GoromStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainViolation = 3,
    NotSpd = 4,
    Singular = 5,
    InfSup = 6,
    DegenerateTestSpace = 7,
    Shape = 8,
    Config = 9,
    Unsupported = 10,
    Io = 11,
    Parse = 12,
    EmptySample = 13,
    Panic = 99,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GoromProblemKind {
    Diffusion = 0,
    AdvectionDiffusion = 1,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum GoromMethod {
    Primal = 0,
    Dual = 1,
    PrimalDual = 2,
    Saddle = 3,
}

impl From<GoromMethod> for Method {
    fn from(m: GoromMethod) -> Self {
        match m {
            GoromMethod::Primal => Method::Primal,
            GoromMethod::Dual => Method::Dual,
            GoromMethod::PrimalDual => Method::PrimalDual,
            GoromMethod::Saddle => Method::Saddle,
        }
    }
}

/// A full-order model.
pub struct GoromModel {
    model: Arc<FullOrderModel>,
    hash: Option<String>,
}

/// Reduced spaces bound to a model.
pub struct GoromReduced {
    reduced: ReducedModel,
    hash: Option<String>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GoromStatus {
    match e {
        Error::DomainViolation { .. } => GoromStatus::DomainViolation,
        Error::NotSpd(_) => GoromStatus::NotSpd,
        Error::Singular(_) => GoromStatus::Singular,
        Error::InfSup { .. } => GoromStatus::InfSup,
        Error::DegenerateTestSpace(_) => GoromStatus::DegenerateTestSpace,
        Error::Shape(_) => GoromStatus::Shape,
        Error::Config(_) => GoromStatus::Config,
        Error::Unsupported(_) => GoromStatus::Unsupported,
        Error::Io { .. } => GoromStatus::Io,
        Error::Parse { .. } => GoromStatus::Parse,
        Error::EmptySample(_) => GoromStatus::EmptySample,
    }
}

struct Fail(GoromStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GoromStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GoromStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal error: {msg}"));
            GoromStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GoromStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Fail(GoromStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

unsafe fn out_slice<'a>(p: *mut f64, len: usize, want: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != want {
        return Err(Fail(GoromStatus::Shape, format!("{what} holds {len} values, {want} needed")));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, len) })
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gorom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn gorom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Generates a benchmark problem.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gorom_model_generate(
    kind: GoromProblemKind,
    n: usize,
    d: usize,
    l: usize,
    seed: u64,
    out: *mut *mut GoromModel,
) -> GoromStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match kind {
            GoromProblemKind::Diffusion => ProblemKind::Diffusion,
            GoromProblemKind::AdvectionDiffusion => ProblemKind::AdvectionDiffusion,
        };
        let model = problems::generate(&ProblemConfig { kind, n, d, l, seed })?;
        let h = Box::new(GoromModel { model: Arc::new(model), hash: None });
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Loads a model bundle directory.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gorom_model_load(dir: *const c_char, out: *mut *mut GoromModel) -> GoromStatus {
    guard(|| {
        let dir = Path::new(unsafe { str_arg(dir, "dir") }?);
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_bundle(dir)?;
        let hash = bundle_hash(dir)?;
        let h = Box::new(GoromModel { model: Arc::new(model), hash: Some(hash) });
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Writes a model bundle directory.
///
/// # Safety
/// `model` must come from this library and `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gorom_model_save(model: *mut GoromModel, dir: *const c_char) -> GoromStatus {
    guard(|| {
        let m = unsafe { model.as_mut() }.ok_or_else(|| null("model"))?;
        let dir = Path::new(unsafe { str_arg(dir, "dir") }?);
        save_bundle(&m.model, dir, None)?;
        m.hash = Some(bundle_hash(dir)?);
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gorom_model_free(model: *mut GoromModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of unknowns, parameters and outputs. Any pointer may be NULL.
///
/// # Safety
/// `model` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn gorom_model_dims(
    model: *const GoromModel,
    n: *mut usize,
    d: *mut usize,
    l: *mut usize,
) -> GoromStatus {
    guard(|| {
        let m = &unsafe { handle(model, "model") }?.model;
        for (p, v) in [(n, m.n()), (d, m.d()), (l, m.l())] {
            if let Some(p) = unsafe { p.as_mut() } {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Full-order output at `xi` (length `d`) written to `s` (length `l`).
///
/// # Safety
/// Array pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn gorom_truth_output(
    model: *const GoromModel,
    xi: *const f64,
    xi_len: usize,
    s: *mut f64,
    s_len: usize,
) -> GoromStatus {
    guard(|| {
        let m = &unsafe { handle(model, "model") }?.model;
        let xi = unsafe { slice_arg(xi, xi_len, "xi") }?;
        let out = unsafe { out_slice(s, s_len, m.l(), "s") }?;
        let v = problems::truth_output(m, xi)?;
        out.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// Runs the greedy construction with a JSON configuration.
///
/// # Safety
/// `model` must come from this library, `config_json` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_build(
    model: *const GoromModel,
    config_json: *const c_char,
    out: *mut *mut GoromReduced,
) -> GoromStatus {
    guard(|| {
        let m = unsafe { handle(model, "model") }?;
        let text = unsafe { str_arg(config_json, "config_json") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg: GreedyConfig =
            serde_json::from_str(text).map_err(|e| Fail(GoromStatus::Config, format!("config: {e}")))?;
        let built = greedy::run(m.model.clone(), &cfg).map_err(|f| Fail::from(f.error))?;
        let h = Box::new(GoromReduced { reduced: built.reduced, hash: m.hash.clone() });
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Loads a spaces directory against `model`.
///
/// # Safety
/// `model` must come from this library, `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_load(
    model: *const GoromModel,
    dir: *const c_char,
    out: *mut *mut GoromReduced,
) -> GoromStatus {
    guard(|| {
        let m = unsafe { handle(model, "model") }?;
        let dir = Path::new(unsafe { str_arg(dir, "dir") }?);
        if out.is_null() {
            return Err(null("out"));
        }
        let reduced = load_spaces(dir, m.model.clone(), m.hash.as_deref())?;
        let h = Box::new(GoromReduced { reduced, hash: m.hash.clone() });
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Writes a spaces directory.
///
/// # Safety
/// `reduced` must come from this library, `dir` be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_save(reduced: *const GoromReduced, dir: *const c_char) -> GoromStatus {
    guard(|| {
        let r = unsafe { handle(reduced, "reduced") }?;
        let dir = Path::new(unsafe { str_arg(dir, "dir") }?);
        save_spaces(&r.reduced, dir, r.hash.as_deref())?;
        Ok(())
    })
}

/// # Safety
/// `reduced` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_free(reduced: *mut GoromReduced) {
    if !reduced.is_null() {
        drop(unsafe { Box::from_raw(reduced) });
    }
}

/// Primal and dual dimensions. Either pointer may be NULL.
///
/// # Safety
/// `reduced` must come from this library.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_dims(reduced: *const GoromReduced, r: *mut usize, k: *mut usize) -> GoromStatus {
    guard(|| {
        let red = &unsafe { handle(reduced, "reduced") }?.reduced;
        for (p, v) in [(r, red.r()), (k, red.k())] {
            if let Some(p) = unsafe { p.as_mut() } {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Reduced output at `xi`.
///
/// # Safety
/// Array pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_eval(
    reduced: *const GoromReduced,
    method: GoromMethod,
    xi: *const f64,
    xi_len: usize,
    s: *mut f64,
    s_len: usize,
) -> GoromStatus {
    guard(|| {
        let red = &unsafe { handle(reduced, "reduced") }?.reduced;
        let xi = unsafe { slice_arg(xi, xi_len, "xi") }?;
        let out = unsafe { out_slice(s, s_len, red.model().l(), "s") }?;
        let sol = red.solve(xi, method.into())?;
        out.copy_from_slice(sol.s.as_slice());
        Ok(())
    })
}

/// Reduced output and its residual error estimate (default estimator settings).
/// `s` may be NULL when `s_len` is 0; `certified` may be NULL.
///
/// # Safety
/// Array pointers must be valid for the given lengths.
#[no_mangle]
pub unsafe extern "C" fn gorom_reduced_estimate(
    reduced: *const GoromReduced,
    method: GoromMethod,
    xi: *const f64,
    xi_len: usize,
    s: *mut f64,
    s_len: usize,
    delta: *mut f64,
    certified: *mut bool,
) -> GoromStatus {
    guard(|| {
        let red = &unsafe { handle(reduced, "reduced") }?.reduced;
        let xi = unsafe { slice_arg(xi, xi_len, "xi") }?;
        if delta.is_null() {
            return Err(null("delta"));
        }
        let sol = red.solve(xi, method.into())?;
        let rec = estimate(red, xi, &sol, &EstimatorConfig::default())?;
        if !(s.is_null() && s_len == 0) {
            unsafe { out_slice(s, s_len, red.model().l(), "s") }?.copy_from_slice(sol.s.as_slice());
        }
        unsafe { *delta = rec.delta };
        if let Some(c) = unsafe { certified.as_mut() } {
            *c = rec.certified;
        }
        Ok(())
    })
}

/// Writes the spaces plus a greedy trace; convenience for offline runs driven from C.
///
/// # Safety
/// `model` must come from this library; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gorom_offline(
    model: *const GoromModel,
    config_json: *const c_char,
    dir: *const c_char,
) -> GoromStatus {
    guard(|| {
        let m = unsafe { handle(model, "model") }?;
        let text = unsafe { str_arg(config_json, "config_json") }?;
        let dir = Path::new(unsafe { str_arg(dir, "dir") }?);
        let cfg: GreedyConfig =
            serde_json::from_str(text).map_err(|e| Fail(GoromStatus::Config, format!("config: {e}")))?;
        match greedy::run(m.model.clone(), &cfg) {
            Ok(out) => {
                save_spaces(&out.reduced, dir, m.hash.as_deref())?;
                save_trace(&out.trace, dir)?;
                Ok(())
            }
            Err(f) => {
                save_trace(&f.trace, dir)?;
                Err(f.error.into())
            }
        }
    })
}
