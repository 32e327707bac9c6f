//! C ABI over the `chaosradio` simulator.
//!
//! Experiments are opaque handles built from the same flat `key=value`
//! configuration text the command line reads. Every function returns a
//! [`CrStatus`]; after a failure, [`cr_last_error_message`] describes it.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chaosradio::cli::RunConfig;
use chaosradio::harness::{ber_sweep, ExperimentConfig, Link, System};
use chaosradio::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Runtime = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Bits counted and errors of one trial.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CrTrialOutcome {
    pub bits_counted: u64,
    pub errors: u64,
}

/// One point of a BER sweep with its 95% Wilson interval.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CrBerPoint {
    pub snr_db: f64,
    pub ebn0_db: f64,
    pub bits_counted: u64,
    pub errors: u64,
    pub ber: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// A validated experiment of one system.
pub struct CrExperiment {
    config: ExperimentConfig,
    link: Link,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(status: CrStatus, msg: impl Into<String>) -> CrStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> CrStatus {
    let status = if e.is_config() { CrStatus::Config } else { CrStatus::Runtime };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> CrStatus) -> CrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CrStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, CrStatus> {
    if s.is_null() {
        return Err(fail(CrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(CrStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

/// Creates an experiment from configuration text and a system name
/// (`chaos_zero`, `chaos_past_isi`, `chaos_past_isi_mmse`, `bpsk`,
/// `bpsk_mmse`). An empty config string selects the defaults.
///
/// # Safety
/// `config_text` and `system` must be valid NUL-terminated strings and `out`
/// a valid pointer. The handle written to `*out` must be released with
/// [`cr_experiment_free`].
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_new(
    config_text: *const c_char,
    system: *const c_char,
    out: *mut *mut CrExperiment,
) -> CrStatus {
    guard(|| {
        if out.is_null() {
            return fail(CrStatus::NullPointer, "out is null");
        }
        *out = ptr::null_mut();
        let text = match read_str(config_text, "config_text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let name = match read_str(system, "system") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let Some(system) = System::parse(name) else {
            return fail(CrStatus::Config, format!("unknown system {name:?}"));
        };
        let built = RunConfig::from_text(text)
            .and_then(|cfg| cfg.experiment(system))
            .and_then(|config| Link::new(&config).map(|link| CrExperiment { config, link }));
        match built {
            Ok(exp) => {
                *out = Box::into_raw(Box::new(exp));
                CrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases an experiment. Null is ignored.
///
/// # Safety
/// `exp` must be null or a handle from [`cr_experiment_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_free(exp: *mut CrExperiment) {
    if !exp.is_null() {
        drop(Box::from_raw(exp));
    }
}

/// Number of SNR points a sweep of `exp` produces (0 for null).
///
/// # Safety
/// `exp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_num_points(exp: *const CrExperiment) -> usize {
    exp.as_ref().map_or(0, |e| e.config.snr_grid.len())
}

/// Runs one Monte Carlo trial at `snr_db` (may be `INFINITY`).
///
/// # Safety
/// `exp` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_run_trial(
    exp: *const CrExperiment,
    snr_db: f64,
    trial_seed: u64,
    out: *mut CrTrialOutcome,
) -> CrStatus {
    guard(|| {
        let (Some(exp), false) = (exp.as_ref(), out.is_null()) else {
            return fail(CrStatus::NullPointer, "experiment or out is null");
        };
        match exp.link.run(snr_db, trial_seed) {
            Ok(t) => {
                *out = CrTrialOutcome { bits_counted: t.bits_counted, errors: t.errors };
                CrStatus::Ok
            }
            Err(e) => from_error(Error::Trial { snr_db, trial: trial_seed, source: Box::new(e) }),
        }
    })
}

/// Runs the full BER sweep into `points`, which must hold
/// [`cr_experiment_num_points`] entries. `*written` receives the number of
/// points stored, or the required count on `BUFFER_TOO_SMALL`.
///
/// # Safety
/// `exp` must be a live handle, `points` valid for `capacity` writes and
/// `written` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_sweep(
    exp: *const CrExperiment,
    points: *mut CrBerPoint,
    capacity: usize,
    written: *mut usize,
) -> CrStatus {
    guard(|| {
        let (Some(exp), false) = (exp.as_ref(), written.is_null()) else {
            return fail(CrStatus::NullPointer, "experiment or written is null");
        };
        let needed = exp.config.snr_grid.len();
        *written = needed;
        if capacity < needed {
            return fail(CrStatus::BufferTooSmall, format!("need room for {needed} points, got {capacity}"));
        }
        if points.is_null() {
            return fail(CrStatus::NullPointer, "points is null");
        }
        match ber_sweep(&exp.config) {
            Ok(result) => {
                let dst = std::slice::from_raw_parts_mut(points, capacity);
                for (d, p) in dst.iter_mut().zip(&result) {
                    *d = CrBerPoint {
                        snr_db: p.snr_db,
                        ebn0_db: p.ebn0_db,
                        bits_counted: p.bits_counted,
                        errors: p.errors,
                        ber: p.ber,
                        ci_low: p.ci_low,
                        ci_high: p.ci_high,
                    };
                }
                *written = result.len();
                CrStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copies the sampled transmit pulse of `exp` into `samples`. `*len`
/// receives the pulse length (also on `BUFFER_TOO_SMALL`) and
/// `*start_index` the sample-grid index of its first sample.
///
/// # Safety
/// `exp` must be a live handle, `samples` valid for `capacity` writes (or
/// null when `capacity` is 0), `len` and `start_index` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn cr_experiment_pulse(
    exp: *const CrExperiment,
    samples: *mut f64,
    capacity: usize,
    len: *mut usize,
    start_index: *mut i64,
) -> CrStatus {
    guard(|| {
        let (Some(exp), false, false) = (exp.as_ref(), len.is_null(), start_index.is_null()) else {
            return fail(CrStatus::NullPointer, "experiment, len or start_index is null");
        };
        let pulse = exp.link.pulse();
        *len = pulse.len();
        *start_index = pulse.start_index();
        if capacity < pulse.len() {
            return fail(CrStatus::BufferTooSmall, format!("need room for {} samples, got {capacity}", pulse.len()));
        }
        if samples.is_null() {
            return fail(CrStatus::NullPointer, "samples is null");
        }
        std::slice::from_raw_parts_mut(samples, pulse.len()).copy_from_slice(pulse.samples());
        CrStatus::Ok
    })
}

/// Copies the message of the last failure on this thread into `buf` as a
/// NUL-terminated string, truncating if needed. Returns the full message
/// length plus one, so a caller can size the buffer with a first call.
///
/// # Safety
/// `buf` must be null or valid for `capacity` bytes.
#[no_mangle]
pub unsafe extern "C" fn cr_last_error_message(buf: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
