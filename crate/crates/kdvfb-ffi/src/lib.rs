//! C ABI over `kdvfb`.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns a [`KdvfbStatus`];
//! the message of the last failure on the calling thread is available from
//! [`kdvfb_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use kdvfb::cli_experiments::{ExperimentConfig, Problem};
use kdvfb::closed_loop::{integrate_closed_loop, LoopMode};
use kdvfb::grid_kdv::StateVector;
use kdvfb::spectral_m::{classify_length, ClassTag, DEFAULT_PAIR_TOL};
use kdvfb::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdvfbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    SynthesisFailed = 4,
    BlowUp = 5,
    Io = 6,
    BufferTooSmall = 7,
    Internal = 8,
}

/// Class of a length.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdvfbClass {
    C = 0,
    N1 = 1,
    N2 = 2,
    N3 = 3,
    N4 = 4,
}

/// State the feedback reads on each step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdvfbMode {
    Delayed = 0,
    PerStep = 1,
}

/// Discretized problem with its steering library.
pub struct KdvfbProblem {
    inner: Problem,
}

/// State on the grid of a [`KdvfbProblem`].
pub struct KdvfbState {
    inner: StateVector,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> KdvfbStatus {
    match err {
        Error::Config(_) | Error::Dimension(_) | Error::Format(_) => KdvfbStatus::InvalidArgument,
        Error::Domain(_) => KdvfbStatus::Domain,
        Error::Synthesis(_)
        | Error::DegenerateTarget { .. }
        | Error::LibraryInvalid(_)
        | Error::UnsupportedClass(_)
        | Error::IllPosedTarget(_)
        | Error::EmptySubspace(_) => KdvfbStatus::SynthesisFailed,
        Error::BlowUp { .. } | Error::FixedPointDivergence { .. } | Error::Smallness { .. } => {
            KdvfbStatus::BlowUp
        }
        Error::Io { .. } => KdvfbStatus::Io,
        _ => KdvfbStatus::Internal,
    }
}

/// Runs `f`, recording errors and panics.
fn guard<F: FnOnce() -> Result<(), KdvfbStatus>>(f: F) -> KdvfbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KdvfbStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            KdvfbStatus::Internal
        }
    }
}

fn fail(err: Error) -> KdvfbStatus {
    let s = status_of(&err);
    set_error(err.to_string());
    s
}

fn invalid(msg: &str) -> KdvfbStatus {
    set_error(msg.into());
    KdvfbStatus::InvalidArgument
}

fn null(what: &str) -> KdvfbStatus {
    set_error(format!("{what} is null"));
    KdvfbStatus::NullPointer
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], KdvfbStatus> {
    if ptr.is_null() {
        return Err(null(what));
    }
    // SAFETY: the caller provides `len` readable values at `ptr`.
    Ok(unsafe { std::slice::from_raw_parts(ptr, len) })
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, KdvfbStatus> {
    // SAFETY: non-null handles come from the matching `*_new` function.
    unsafe { ptr.as_ref() }.ok_or_else(|| null(what))
}

/// Copies the last error message of this thread into `buf` with a
/// terminating NUL. Returns the message length without the NUL; if that is
/// `>= len` the message was truncated.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has `len > n` writable bytes.
            unsafe {
                std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Classifies `length` and reports the dimension of M.
///
/// # Safety
/// `class_out` and `dim_out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_classify(
    length: f64,
    class_out: *mut KdvfbClass,
    dim_out: *mut usize,
) -> KdvfbStatus {
    guard(|| {
        if class_out.is_null() || dim_out.is_null() {
            return Err(null("output pointer"));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length must be positive"));
        }
        let c = classify_length(length, DEFAULT_PAIR_TOL);
        let tag = match c.tag {
            ClassTag::C => KdvfbClass::C,
            ClassTag::N1 => KdvfbClass::N1,
            ClassTag::N2 => KdvfbClass::N2,
            ClassTag::N3 => KdvfbClass::N3,
            ClassTag::N4 => KdvfbClass::N4,
        };
        // SAFETY: checked non-null above.
        unsafe {
            *class_out = tag;
            *dim_out = c.dim_m;
        }
        Ok(())
    })
}

/// Builds the problem on `nodes` grid nodes and its steering library.
/// `dt <= 0` selects the default step.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_problem_new(
    length: f64,
    nodes: usize,
    dt: f64,
    out: *mut *mut KdvfbProblem,
) -> KdvfbStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig {
            length,
            grid: nodes,
            dt: (dt > 0.0).then_some(dt),
            ..ExperimentConfig::default()
        };
        let p = Problem::setup(&cfg).map_err(fail)?;
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(KdvfbProblem { inner: p })) };
        Ok(())
    })
}

/// Releases a problem; null is ignored.
///
/// # Safety
/// `p` must be null or a handle from [`kdvfb_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_problem_free(p: *mut KdvfbProblem) {
    if !p.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Period, time step, dimension of M and margin of the feedback.
///
/// # Safety
/// `p` must be a live handle; outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_problem_info(
    p: *const KdvfbProblem,
    period: *mut f64,
    dt: *mut f64,
    modal_dim: *mut usize,
    delta: *mut f64,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let p = unsafe { handle(p, "problem") }?;
        let lib = &p.inner.library;
        // SAFETY: each output is written only when non-null.
        unsafe {
            if let Some(v) = period.as_mut() {
                *v = lib.period();
            }
            if let Some(v) = dt.as_mut() {
                *v = lib.dt;
            }
            if let Some(v) = modal_dim.as_mut() {
                *v = lib.modal_dim;
            }
            if let Some(v) = delta.as_mut() {
                *v = lib.delta;
            }
        }
        Ok(())
    })
}

/// Writes the steering library to `path` (UTF-8, NUL-terminated).
///
/// # Safety
/// `p` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_problem_save_library(
    p: *const KdvfbProblem,
    path: *const c_char,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let p = unsafe { handle(p, "problem") }?;
        if path.is_null() {
            return Err(null("path"));
        }
        // SAFETY: `path` is a valid C string.
        let s = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| invalid("path is not UTF-8"))?;
        p.inner.library.save(Path::new(s)).map_err(fail)
    })
}

/// Feedback `u_eps(t, y)` for modal coefficients `modal` of `P_M y`.
///
/// # Safety
/// `p` must be a live handle, `modal` must hold `len` values and `out` be
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_feedback(
    p: *const KdvfbProblem,
    epsilon: f64,
    t: f64,
    modal: *const f64,
    len: usize,
    out: *mut f64,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let p = unsafe { handle(p, "problem") }?;
        // SAFETY: see the function contract.
        let a = unsafe { slice(modal, len, "modal") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len != p.inner.library.modal_dim {
            return Err(invalid("modal length differs from the dimension of M"));
        }
        let u = match p.inner.feedback(epsilon).map_err(fail)? {
            kdvfb::closed_loop::Feedback::Zero => 0.0,
            kdvfb::closed_loop::Feedback::Eps(f) => f.u_eps_modal(t, a),
        };
        // SAFETY: checked non-null above.
        unsafe { *out = u };
        Ok(())
    })
}

/// State with `modal` coefficients in M plus the projection of the
/// piecewise-linear interpolant of `nodal` (one value per grid node, or
/// null for none) onto H.
///
/// # Safety
/// `p` must be a live handle; `modal` must hold `modal_len` values and
/// `nodal` either be null or hold `nodal_len` values; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_state_new(
    p: *const KdvfbProblem,
    modal: *const f64,
    modal_len: usize,
    nodal: *const f64,
    nodal_len: usize,
    out: *mut *mut KdvfbState,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let p = unsafe { handle(p, "problem") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let space = p.inner.space();
        // SAFETY: see the function contract.
        let a = unsafe { slice(modal, modal_len, "modal") }?;
        let mut y = StateVector::from_modal(space, a).map_err(fail)?;
        if !nodal.is_null() {
            // SAFETY: see the function contract.
            let v = unsafe { slice(nodal, nodal_len, "nodal") }?;
            let h = StateVector::from_nodal_values(space, v)
                .map_err(fail)?
                .project_h();
            y = y.add(&h);
        }
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(Box::new(KdvfbState { inner: y })) };
        Ok(())
    })
}

/// Releases a state; null is ignored.
///
/// # Safety
/// `s` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_state_free(s: *mut KdvfbState) {
    if !s.is_null() {
        // SAFETY: ownership returns from the caller.
        drop(unsafe { Box::from_raw(s) });
    }
}

/// `|P_H y|` and `|P_M y|`.
///
/// # Safety
/// `s` must be a live handle; outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_state_norms(
    s: *const KdvfbState,
    norm_h: *mut f64,
    norm_m: *mut f64,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let s = unsafe { handle(s, "state") }?;
        if norm_h.is_null() || norm_m.is_null() {
            return Err(null("output pointer"));
        }
        // SAFETY: checked non-null above.
        unsafe {
            *norm_h = s.inner.norm_h();
            *norm_m = s.inner.norm_m();
        }
        Ok(())
    })
}

/// Nodal values of the state into `buf` of `len` entries.
///
/// # Safety
/// `s` must be a live handle and `buf` hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_state_values(
    s: *const KdvfbState,
    buf: *mut f64,
    len: usize,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let s = unsafe { handle(s, "state") }?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let v = s.inner.values();
        if len < v.len() {
            set_error(format!("buffer holds {len} values, {} needed", v.len()));
            return Err(KdvfbStatus::BufferTooSmall);
        }
        // SAFETY: `buf` holds at least `v.len()` values.
        unsafe { std::ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len()) };
        Ok(())
    })
}

/// Integrates the closed loop with gain `epsilon` (0 for no feedback) over
/// `duration` from `state`, which is replaced by the final state.
///
/// # Safety
/// `p` must be a live handle and `s` a live state created from it.
#[no_mangle]
pub unsafe extern "C" fn kdvfb_closed_loop(
    p: *const KdvfbProblem,
    epsilon: f64,
    mode: KdvfbMode,
    duration: f64,
    s: *mut KdvfbState,
) -> KdvfbStatus {
    guard(|| {
        // SAFETY: see the function contract.
        let p = unsafe { handle(p, "problem") }?;
        // SAFETY: see the function contract.
        let s = unsafe { s.as_mut() }.ok_or_else(|| null("state"))?;
        let mode = match mode {
            KdvfbMode::Delayed => LoopMode::Delayed,
            KdvfbMode::PerStep => LoopMode::PerStep,
        };
        let cfg = ExperimentConfig {
            mode,
            ..ExperimentConfig::default()
        };
        let lc = p.inner.loop_config(&cfg, epsilon, duration).map_err(fail)?;
        let rec = integrate_closed_loop(&p.inner.stepper, &s.inner, 0.0, &lc).map_err(fail)?;
        s.inner = rec.final_state;
        Ok(())
    })
}
