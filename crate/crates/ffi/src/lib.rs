//! C ABI over the dramchar simulator.
//!
//! Configurations and reports are opaque handles owned by the caller and
//! released with their `_free` functions. Every fallible call returns a
//! [`DcStatus`]; the message for the most recent failure on the calling
//! thread is available from [`dc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dramchar::harness::{
    resolve_spec, run_experiment, spec_dir_from_env, ExperimentConfig, HarnessError, Mode, RunOptions, SimReport,
    TraceSource,
};
use dramchar::trace::SyntheticPattern;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Trace = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Experiment configuration under construction.
pub struct DcConfig {
    inner: ExperimentConfig,
}

/// Finished simulation report.
pub struct DcReport {
    inner: SimReport,
    json: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: DcStatus, msg: impl ToString) -> DcStatus {
    set_error(msg);
    status
}

fn harness_status(e: &HarnessError) -> DcStatus {
    if e.exit_code() == 3 {
        DcStatus::Trace
    } else {
        DcStatus::Config
    }
}

/// Runs `f`, turning a panic into `DcStatus::Panic`.
fn guard(f: impl FnOnce() -> DcStatus) -> DcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(DcStatus::Panic, "internal panic"),
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, DcStatus> {
    if s.is_null() {
        return Err(fail(DcStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(DcStatus::InvalidUtf8, "string argument is not UTF-8"))
}

/// # Safety
/// `cfg` must be null or a live handle from this library.
unsafe fn config_mut<'a>(cfg: *mut DcConfig) -> Result<&'a mut ExperimentConfig, DcStatus> {
    cfg.as_mut()
        .map(|c| &mut c.inner)
        .ok_or_else(|| fail(DcStatus::NullPointer, "null config handle"))
}

fn into_status(r: Result<(), DcStatus>) -> DcStatus {
    r.err().unwrap_or(DcStatus::Ok)
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses an experiment file's contents.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_config_from_toml(toml: *const c_char, out: *mut *mut DcConfig) -> DcStatus {
    guard(|| {
        into_status((|| {
            if out.is_null() {
                return Err(fail(DcStatus::NullPointer, "null output pointer"));
            }
            let text = str_arg(toml)?;
            let inner = ExperimentConfig::from_toml(text).map_err(|e| fail(harness_status(&e), e))?;
            *out = Box::into_raw(Box::new(DcConfig { inner }));
            Ok(())
        })())
    })
}

/// A single-trace configuration for a named DRAM type with no traces yet.
/// Names resolve through the spec directory environment variable first.
///
/// # Safety
/// `dram` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_config_new(dram: *const c_char, out: *mut *mut DcConfig) -> DcStatus {
    guard(|| {
        into_status((|| {
            if out.is_null() {
                return Err(fail(DcStatus::NullPointer, "null output pointer"));
            }
            let name = str_arg(dram)?;
            let spec = resolve_spec(name, spec_dir_from_env().as_deref()).map_err(|e| fail(DcStatus::Config, e))?;
            let inner = ExperimentConfig::new(spec, Mode::Single, Vec::new());
            *out = Box::into_raw(Box::new(DcConfig { inner }));
            Ok(())
        })())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_config_free(cfg: *mut DcConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// `mode` is one of `single`, `bundle`, `network` or `multithreaded`.
///
/// # Safety
/// `cfg` must be a live handle and `mode` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_config_set_mode(cfg: *mut DcConfig, mode: *const c_char) -> DcStatus {
    guard(|| {
        into_status((|| {
            let c = config_mut(cfg)?;
            c.mode = str_arg(mode)?.parse().map_err(|e| fail(DcStatus::Config, e))?;
            Ok(())
        })())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_config_set_seed(cfg: *mut DcConfig, seed: u64) -> DcStatus {
    into_status(config_mut(cfg).map(|c| c.seed = seed))
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_config_set_warmup(cfg: *mut DcConfig, instructions: u64) -> DcStatus {
    into_status(config_mut(cfg).map(|c| c.warmup_instructions = instructions))
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_config_set_max_inflight(cfg: *mut DcConfig, max_inflight: usize) -> DcStatus {
    into_status(config_mut(cfg).and_then(|c| {
        if max_inflight == 0 {
            return Err(fail(DcStatus::OutOfRange, "max_inflight must be positive"));
        }
        c.network.max_inflight = max_inflight;
        Ok(())
    }))
}

/// Appends a trace file as the next core's (or injector's) input.
///
/// # Safety
/// `cfg` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_config_add_trace_file(cfg: *mut DcConfig, path: *const c_char) -> DcStatus {
    guard(|| {
        into_status((|| {
            let c = config_mut(cfg)?;
            let p = PathBuf::from(str_arg(path)?);
            c.traces.push(TraceSource::file(p));
            Ok(())
        })())
    })
}

/// Appends a synthetic trace, e.g. `random:footprint=64MiB,rpki=20,seed=1`.
///
/// # Safety
/// `cfg` must be a live handle and `pattern` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dc_config_add_synthetic(
    cfg: *mut DcConfig,
    pattern: *const c_char,
    instructions: u64,
) -> DcStatus {
    guard(|| {
        into_status((|| {
            let c = config_mut(cfg)?;
            let p: SyntheticPattern = str_arg(pattern)?.parse().map_err(|e| fail(DcStatus::Config, e))?;
            if instructions == 0 {
                return Err(fail(DcStatus::OutOfRange, "instructions must be positive"));
            }
            c.traces.push(TraceSource::synthetic(p, instructions));
            Ok(())
        })())
    })
}

/// Runs the experiment. On success `*out` receives a report the caller
/// frees with [`dc_report_free`].
///
/// # Safety
/// `cfg` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_run(cfg: *const DcConfig, out: *mut *mut DcReport) -> DcStatus {
    guard(|| {
        into_status((|| {
            if out.is_null() {
                return Err(fail(DcStatus::NullPointer, "null output pointer"));
            }
            let c = cfg.as_ref().ok_or_else(|| fail(DcStatus::NullPointer, "null config handle"))?;
            let report = run_experiment(&c.inner, RunOptions::default()).map_err(|e| fail(harness_status(&e), e))?;
            let json = CString::new(report.to_json()).map_err(|e| fail(DcStatus::Config, e))?;
            *out = Box::into_raw(Box::new(DcReport { inner: report, json }));
            Ok(())
        })())
    })
}

/// # Safety
/// `report` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dc_report_free(report: *mut DcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// The full report as JSON, owned by the report handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_report_json(report: *const DcReport) -> *const c_char {
    report.as_ref().map_or(ptr::null(), |r| r.json.as_ptr())
}

/// Number of per-core entries in the report.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_report_cores(report: *const DcReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.cores.len())
}

/// # Safety
/// `report` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn dc_report_ipc(report: *const DcReport, core: usize, out: *mut f64) -> DcStatus {
    let Some(r) = report.as_ref() else {
        return fail(DcStatus::NullPointer, "null report handle");
    };
    if out.is_null() {
        return fail(DcStatus::NullPointer, "null output pointer");
    }
    match r.inner.cores.get(core) {
        Some(c) => {
            *out = c.ipc;
            DcStatus::Ok
        }
        None => fail(DcStatus::OutOfRange, format!("no core {core}")),
    }
}

/// Average busy banks per cycle over the measured window.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_report_bpu(report: *const DcReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.memory.bpu)
}

/// Row-buffer hit fraction over the measured window.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_report_hit_fraction(report: *const DcReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.memory.hit_fraction)
}

/// Total DRAM energy in joules, or NaN when the type has no energy model.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dc_report_energy_j(report: *const DcReport) -> f64 {
    report
        .as_ref()
        .and_then(|r| r.inner.energy.map(|e| e.total_j))
        .unwrap_or(f64::NAN)
}
