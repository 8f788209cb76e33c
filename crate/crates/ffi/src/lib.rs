//! C ABI over the qwsearch core.
//!
//! Every function returns a [`QwsStatus`]; on anything but `QWS_STATUS_OK`
//! the message is available from [`qws_last_error`] on the same thread.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qwsearch::classical::Expectation;
use qwsearch::graph::build_chain;
use qwsearch::harness::{self, ExperimentReport, LoadedInstance, SuiteName};
use qwsearch::search::{search_fastforward, search_simple, SearchConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QwsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Computation = 4,
    Panic = 5,
}

/// A validated instance file.
pub struct QwsInstance {
    inner: LoadedInstance,
}

/// An experiment report.
pub struct QwsReport {
    inner: ExperimentReport,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QwsStopping {
    /// E_σ(τ_M); +inf when M is unreachable.
    pub hitting_time: f64,
    pub return_probability: f64,
    pub expected_return: f64,
    pub commute_time: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(QwsStatus, String);

fn computation(e: qwsearch::Error) -> Fail {
    Fail(QwsStatus::Computation, e.to_string())
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> QwsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QwsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            QwsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(QwsStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(QwsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(QwsStatus::NullPointer, format!("{what} is NULL")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(QwsStatus::NullPointer, format!("{what} is NULL")))
    } else {
        Ok(())
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn qws_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an instance from a NUL-terminated JSON string.
///
/// # Safety
/// `json` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_instance_from_json(json: *const c_char, lenient: bool, out: *mut *mut QwsInstance) -> QwsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let text = str_arg(json, "json")?;
        let inner = harness::parse_instance(text, "instance", lenient).map_err(|e| Fail(QwsStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(QwsInstance { inner }));
        Ok(())
    })
}

/// Loads an instance file.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_instance_load(path: *const c_char, lenient: bool, out: *mut *mut QwsInstance) -> QwsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let path = str_arg(path, "path")?;
        let inner = harness::load_instance(Path::new(path), lenient).map_err(|e| Fail(QwsStatus::Parse, e.to_string()))?;
        *out = Box::into_raw(Box::new(QwsInstance { inner }));
        Ok(())
    })
}

/// # Safety
/// `inst` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn qws_instance_free(inst: *mut QwsInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_instance_vertex_count(inst: *const QwsInstance, out: *mut usize) -> QwsStatus {
    guard(|| {
        let i = handle(inst, "instance")?;
        out_ptr(out, "out")?;
        *out = i.inner.problem.graph.n();
        Ok(())
    })
}

/// Effective resistance R_{σ,M} and C_{σ,M} = W·R_{σ,M}.
///
/// # Safety
/// `inst` must be a live handle; `r` and `c` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_resistance(inst: *const QwsInstance, r: *mut f64, c: *mut f64) -> QwsStatus {
    guard(|| {
        let i = handle(inst, "instance")?;
        out_ptr(r, "r")?;
        out_ptr(c, "c")?;
        let p = &i.inner.problem;
        *r = qwsearch::electric::effective_resistance(&p.graph, &p.sigma, &p.marked).map_err(computation)?.value;
        *c = qwsearch::electric::commute_quantity(&p.graph, &p.sigma, &p.marked).map_err(computation)?;
        Ok(())
    })
}

/// Exact stopping statistics with S = supp σ.
///
/// # Safety
/// `inst` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_stopping_stats(inst: *const QwsInstance, out: *mut QwsStopping) -> QwsStatus {
    guard(|| {
        let i = handle(inst, "instance")?;
        out_ptr(out, "out")?;
        let p = &i.inner.problem;
        let c = build_chain(&p.graph).map_err(computation)?;
        let st = qwsearch::classical::stopping_stats(&c, &p.sigma.support(), &p.marked, &p.sigma).map_err(computation)?;
        let val = |e: Expectation| e.finite().unwrap_or(f64::INFINITY);
        *out = QwsStopping {
            hitting_time: val(st.hitting_time),
            return_probability: st.return_probability,
            expected_return: st.expected_return,
            commute_time: val(st.commute_time),
        };
        Ok(())
    })
}

unsafe fn run_search(
    inst: *const QwsInstance,
    horizon: usize,
    seed: u64,
    success: *mut f64,
    found: *mut i64,
    simple: bool,
) -> QwsStatus {
    guard(|| {
        let i = handle(inst, "instance")?;
        out_ptr(success, "success")?;
        let p = &i.inner.problem;
        let c = build_chain(&p.graph).map_err(computation)?;
        let mut cfg = SearchConfig::new(horizon, seed);
        cfg.budget = i.inner.budget;
        let o = if simple {
            search_simple(&c, &p.sigma, &p.marked, &cfg)
        } else {
            search_fastforward(&c, &p.sigma, &p.marked, &cfg)
        }
        .map_err(computation)?;
        *success = o.success_probability;
        if !found.is_null() {
            *found = o.found.map_or(-1, |u| u as i64);
        }
        Ok(())
    })
}

/// Fast-forward search at horizon T. `success` receives the exact post-amplification
/// probability; `found` (may be NULL) the sampled vertex or -1.
///
/// # Safety
/// `inst` must be a live handle; `success` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_search_fastforward(
    inst: *const QwsInstance,
    horizon: usize,
    seed: u64,
    success: *mut f64,
    found: *mut i64,
) -> QwsStatus {
    run_search(inst, horizon, seed, success, found, false)
}

/// Simple search at horizon T; `success` receives the exact single-shot probability.
///
/// # Safety
/// As for [`qws_search_fastforward`].
#[no_mangle]
pub unsafe extern "C" fn qws_search_simple(
    inst: *const QwsInstance,
    horizon: usize,
    seed: u64,
    success: *mut f64,
    found: *mut i64,
) -> QwsStatus {
    run_search(inst, horizon, seed, success, found, true)
}

/// Runs an invariant suite: "electric", "classical", "quantum", "ffwd", "search" or "all".
///
/// # Safety
/// `name` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_run_suite(name: *const c_char, seed: u64, out: *mut *mut QwsReport) -> QwsStatus {
    guard(|| {
        out_ptr(out, "out")?;
        let name: SuiteName =
            str_arg(name, "name")?.parse().map_err(|e: qwsearch::Error| Fail(QwsStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(QwsReport { inner: harness::run_suite(name, seed) }));
        Ok(())
    })
}

/// # Safety
/// `report` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_report_summary(report: *const QwsReport, rows: *mut usize, failed: *mut usize) -> QwsStatus {
    guard(|| {
        let r = handle(report, "report")?;
        out_ptr(rows, "rows")?;
        out_ptr(failed, "failed")?;
        *rows = r.inner.rows.len();
        *failed = r.inner.failures().count();
        Ok(())
    })
}

/// Report as JSON (`csv` false) or CSV; free the string with [`qws_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qws_report_render(report: *const QwsReport, csv: bool, out: *mut *mut c_char) -> QwsStatus {
    guard(|| {
        let r = handle(report, "report")?;
        out_ptr(out, "out")?;
        let fmt = if csv { harness::Format::Csv } else { harness::Format::Json };
        let s = CString::new(r.inner.render(fmt)).map_err(|e| Fail(QwsStatus::Computation, e.to_string()))?;
        *out = s.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn qws_report_free(report: *mut QwsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice. NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn qws_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version as a static C string.
#[no_mangle]
pub extern "C" fn qws_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
