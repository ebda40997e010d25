//! C ABI over the bpsmooth engine. Every entry point returns a [`BpsStatus`];
//! on failure the message is kept per thread in [`bps_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use bpsmooth::bp::{BpMatching, RunOptions};
use bpsmooth::instance::io::read_instance;
use bpsmooth::oracles::{cheapest_residual_cycle, matching_delta, min_cost_flow, mwm};
use bpsmooth::{BipartiteInstance, Edge, Error, Instance};

/// Result codes shared by all functions.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInstance = 2,
    Parse = 3,
    Parameter = 4,
    Cap = 5,
    Infeasible = 6,
    NotOptimal = 7,
    WrongKind = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque handle to a bipartite instance or a flow network.
pub struct BpsInstance {
    inner: Instance,
}

/// Outcome of a BP run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpsRunResult {
    /// First iteration of the stable window, valid when `converged` is set.
    pub tau: u64,
    pub converged: bool,
    pub last_iteration: u64,
    pub is_matching: bool,
    pub tie_detected: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BpsStatus {
    match e {
        Error::Invalid(_) => BpsStatus::InvalidInstance,
        Error::Parse { .. } => BpsStatus::Parse,
        Error::Parameter(_) | Error::Config(_) => BpsStatus::Parameter,
        Error::Cap(_) => BpsStatus::Cap,
        Error::Infeasible(_) => BpsStatus::Infeasible,
        Error::NotOptimal(_) => BpsStatus::NotOptimal,
        Error::Io(_) => BpsStatus::Io,
    }
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard(f: impl FnOnce() -> Result<(), (BpsStatus, String)>) -> BpsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BpsStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(_) => {
            set_error("internal panic".into());
            BpsStatus::Panic
        }
    }
}

fn lift<T>(r: bpsmooth::Result<T>) -> Result<T, (BpsStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null() -> (BpsStatus, String) {
    (BpsStatus::NullPointer, "null pointer argument".into())
}

fn bipartite<'a>(inst: *const BpsInstance) -> Result<&'a BipartiteInstance, (BpsStatus, String)> {
    // SAFETY: callers pass a live handle from this library or null.
    match unsafe { inst.as_ref() } {
        None => Err(null()),
        Some(BpsInstance { inner: Instance::Bipartite(b) }) => Ok(b),
        Some(_) => Err((BpsStatus::WrongKind, "expected a bipartite instance".into())),
    }
}

fn publish(inner: Instance, out: *mut *mut BpsInstance) -> Result<(), (BpsStatus, String)> {
    if out.is_null() {
        return Err(null());
    }
    // SAFETY: `out` is non-null and points to writable storage per the contract.
    unsafe { *out = Box::into_raw(Box::new(BpsInstance { inner })) };
    Ok(())
}

/// Builds a bipartite instance from `m` edges given as parallel arrays of
/// 0-based left index, 0-based right index and weight.
///
/// # Safety
/// Each array must hold `m` readable elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_from_edges(
    n_left: usize,
    n_right: usize,
    left: *const usize,
    right: *const usize,
    weight: *const f64,
    m: usize,
    out: *mut *mut BpsInstance,
) -> BpsStatus {
    guard(|| {
        if m > 0 && (left.is_null() || right.is_null() || weight.is_null()) {
            return Err(null());
        }
        let edges = (0..m)
            .map(|k| unsafe { Edge::new(*left.add(k), *right.add(k), *weight.add(k)) })
            .collect();
        publish(Instance::Bipartite(lift(BipartiteInstance::new(n_left, n_right, edges))?), out)
    })
}

/// Builds a complete bipartite instance from a row-major weight matrix.
///
/// # Safety
/// `weights` must hold `n_left * n_right` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_from_matrix(
    n_left: usize,
    n_right: usize,
    weights: *const f64,
    out: *mut *mut BpsInstance,
) -> BpsStatus {
    guard(|| {
        if weights.is_null() && n_left * n_right > 0 {
            return Err(null());
        }
        let w = if n_left * n_right == 0 { &[][..] } else { unsafe { std::slice::from_raw_parts(weights, n_left * n_right) } };
        publish(Instance::Bipartite(lift(BipartiteInstance::from_matrix(n_left, n_right, w))?), out)
    })
}

/// Parses an instance in the text format (`bip` or `flow` header).
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_parse(text: *const c_char, out: *mut *mut BpsInstance) -> BpsStatus {
    guard(|| {
        if text.is_null() {
            return Err(null());
        }
        let s = unsafe { CStr::from_ptr(text) }
            .to_str()
            .map_err(|e| (BpsStatus::Parse, format!("instance text is not UTF-8: {e}")))?;
        publish(lift(read_instance(s))?, out)
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `inst` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_free(inst: *mut BpsInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Returns 1 for a flow network, 0 for a bipartite instance, -1 for null.
///
/// # Safety
/// `inst` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_is_flow(inst: *const BpsInstance) -> i32 {
    match unsafe { inst.as_ref() } {
        None => -1,
        Some(BpsInstance { inner: Instance::Flow(_) }) => 1,
        Some(_) => 0,
    }
}

/// Left and right node counts of a bipartite instance.
///
/// # Safety
/// `inst` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_instance_size(
    inst: *const BpsInstance,
    n_left: *mut usize,
    n_right: *mut usize,
) -> BpsStatus {
    guard(|| {
        let b = bipartite(inst)?;
        if n_left.is_null() || n_right.is_null() {
            return Err(null());
        }
        unsafe {
            *n_left = b.n_left;
            *n_right = b.n_right;
        }
        Ok(())
    })
}

fn write_assignment(a: &[Option<usize>], out: *mut i64) {
    for (i, j) in a.iter().enumerate() {
        // SAFETY: the caller provides room for `n_left` entries.
        unsafe { *out.add(i) = j.map_or(-1, |j| j as i64) };
    }
}

/// Runs max-product BP until `window` identical valid decodings or `t_max`
/// iterations. `assignment` receives one right index per left node, -1 when
/// unmatched.
///
/// # Safety
/// `inst` must be a live bipartite handle, `assignment` must hold `n_left`
/// writable entries and `result` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_run(
    inst: *const BpsInstance,
    t_max: usize,
    window: usize,
    assignment: *mut i64,
    result: *mut BpsRunResult,
) -> BpsStatus {
    guard(|| {
        let b = bipartite(inst)?;
        if assignment.is_null() || result.is_null() {
            return Err(null());
        }
        if window == 0 {
            return Err((BpsStatus::Parameter, "window must be positive".into()));
        }
        let r = lift(BpMatching::new(b))?.run(&RunOptions::new(t_max, window));
        write_assignment(&r.final_assignment, assignment);
        unsafe {
            *result = BpsRunResult {
                tau: r.tau.unwrap_or(0) as u64,
                converged: r.converged,
                last_iteration: r.last_iteration as u64,
                is_matching: r.is_matching,
                tie_detected: r.tie_detected,
            };
        }
        Ok(())
    })
}

/// Maximum-weight matching in the same assignment layout as [`bps_run`].
///
/// # Safety
/// As for [`bps_run`]; `weight` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_max_weight_matching(
    inst: *const BpsInstance,
    assignment: *mut i64,
    weight: *mut f64,
) -> BpsStatus {
    guard(|| {
        let b = bipartite(inst)?;
        if assignment.is_null() || weight.is_null() {
            return Err(null());
        }
        let m = lift(mwm(b))?;
        write_assignment(&m.left_partners(b.n_left), assignment);
        unsafe { *weight = m.weight };
        Ok(())
    })
}

/// Gap between the best and second-best matching, +inf when only one exists.
/// Fails with `Cap` on instances too large to enumerate.
///
/// # Safety
/// `inst` must be a live bipartite handle; `delta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_matching_delta(inst: *const BpsInstance, delta: *mut f64) -> BpsStatus {
    guard(|| {
        let b = bipartite(inst)?;
        if delta.is_null() {
            return Err(null());
        }
        let g = lift(matching_delta(b))?;
        unsafe { *delta = g.delta };
        Ok(())
    })
}

/// Min-cost flow cost and the cost of the cheapest residual cycle at that
/// flow, +inf when the residual graph has no cycle.
///
/// # Safety
/// `inst` must be a live flow handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn bps_flow_gap(inst: *const BpsInstance, cost: *mut f64, cycle_gap: *mut f64) -> BpsStatus {
    guard(|| {
        let net = match unsafe { inst.as_ref() } {
            None => return Err(null()),
            Some(BpsInstance { inner: Instance::Flow(n) }) => n,
            Some(_) => return Err((BpsStatus::WrongKind, "expected a flow network".into())),
        };
        if cost.is_null() || cycle_gap.is_null() {
            return Err(null());
        }
        let f = lift(min_cost_flow(net))?;
        let gap = lift(cheapest_residual_cycle(net, &f))?;
        unsafe {
            *cost = f.cost(net);
            *cycle_gap = gap.unwrap_or(f64::INFINITY);
        }
        Ok(())
    })
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bps_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn bps_status_name(status: BpsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        BpsStatus::Ok => c"ok",
        BpsStatus::NullPointer => c"null pointer",
        BpsStatus::InvalidInstance => c"invalid instance",
        BpsStatus::Parse => c"parse error",
        BpsStatus::Parameter => c"bad parameter",
        BpsStatus::Cap => c"size cap exceeded",
        BpsStatus::Infeasible => c"infeasible",
        BpsStatus::NotOptimal => c"flow not optimal",
        BpsStatus::WrongKind => c"wrong instance kind",
        BpsStatus::Io => c"io error",
        BpsStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
