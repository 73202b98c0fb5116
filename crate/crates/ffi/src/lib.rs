//! C interface over the core library.
//!
//! Conventions: every fallible function returns an [`HsStatus`] and writes
//! its result through an out pointer that is touched only on `Ok`. The
//! message behind the most recent failure on the current thread is
//! available from [`hs_last_error`] until the next call on that thread.
//! Handles come from `hs_*_new`/`hs_*_parse` functions and must go back
//! to the matching `hs_*_free`; strings returned through out pointers
//! must go to [`hs_string_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use hypersense::data_model::{build_cells, read_runs, PerfMetric, RunFormat, RunSet};
use hypersense::dimensionality::dim_curve;
use hypersense::plane::{classify_region, PlanePoint, Region};
use hypersense::scoring::{env_percentiles, normalize, ScoreTable};
use hypersense::sensitivity::sensitivity;
use hypersense::transforms::{symexp, symlog, ObservationNormalizer, PercentileScaler};

/// Result of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    HsOk = 0,
    /// A required pointer argument was null.
    HsNullArg = 1,
    /// The input failed validation; see `hs_last_error`.
    HsInvalidInput = 2,
    /// The computation failed on valid input; see `hs_last_error`.
    HsFailed = 3,
    /// An internal panic was caught; see `hs_last_error`.
    HsPanic = 4,
}

/// A parsed, validated set of runs. Opaque.
pub struct HsRunSet {
    inner: RunSet,
}

/// Normalized scores over retained cells. Opaque.
pub struct HsScoreTable {
    inner: ScoreTable,
}

/// Streaming percentile scaler for advantages. Opaque.
pub struct HsScaler {
    inner: PercentileScaler,
}

/// Streaming per-dimension observation normalizer. Opaque.
pub struct HsObsNorm {
    inner: ObservationNormalizer,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> =
        RefCell::new(CString::new("").expect("empty string has no interior nul"));
}

fn set_error(msg: &str) {
    let clean = msg.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(clean).expect("interior nuls replaced");
    });
}

fn status_of(err: &hypersense::Error) -> HsStatus {
    set_error(&err.to_string());
    match err.exit_class() {
        1 => HsStatus::HsInvalidInput,
        _ => HsStatus::HsFailed,
    }
}

fn guarded(f: impl FnOnce() -> HsStatus) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            HsStatus::HsPanic
        }
    }
}

/// # Safety
/// `ptr` must be null or a valid nul-terminated string.
unsafe fn opt_str<'a>(ptr: *const c_char) -> Result<Option<&'a str>, HsStatus> {
    if ptr.is_null() {
        return Ok(None);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Some(s)),
        Err(_) => {
            set_error("argument is not valid UTF-8");
            Err(HsStatus::HsInvalidInput)
        }
    }
}

unsafe fn required_str<'a>(ptr: *const c_char) -> Result<&'a str, HsStatus> {
    match opt_str(ptr)? {
        Some(s) => Ok(s),
        None => {
            set_error("required string argument is null");
            Err(HsStatus::HsNullArg)
        }
    }
}

fn string_out(text: String, out: *mut *mut c_char) -> HsStatus {
    let c = match CString::new(text) {
        Ok(c) => c,
        Err(_) => {
            set_error("result contained an interior nul byte");
            return HsStatus::HsFailed;
        }
    };
    unsafe { *out = c.into_raw() };
    HsStatus::HsOk
}

/// Library version as a static nul-terminated string. Never freed.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message behind the most recent failure on this thread. Valid until the
/// next library call on the same thread. Never freed by the caller.
#[no_mangle]
pub extern "C" fn hs_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Frees a string returned through an out pointer.
///
/// # Safety
/// `s` must be null or exactly as returned by this library.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses JSONL run records (the same dialect the CLI reads) into a run
/// set, inferring the grid from the values present. `metric` is `"auc"`,
/// `"final:<window>"`, or null for the default.
///
/// # Safety
/// `text` must be a valid nul-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_runs_parse_jsonl(
    text: *const c_char,
    metric: *const c_char,
    out: *mut *mut HsRunSet,
) -> HsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return HsStatus::HsNullArg;
        }
        let text = match required_str(text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let metric = match opt_str(metric) {
            Ok(None) => PerfMetric::Auc,
            Ok(Some(s)) => match s.parse::<PerfMetric>() {
                Ok(m) => m,
                Err(e) => return status_of(&e),
            },
            Err(status) => return status,
        };
        match read_runs(text.as_bytes(), RunFormat::Jsonl, metric, None, "<memory>") {
            Ok(runs) => {
                *out = Box::into_raw(Box::new(HsRunSet { inner: runs }));
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Number of runs in a set; -1 if the handle is null.
///
/// # Safety
/// `runs` must be null or a valid handle.
#[no_mangle]
pub unsafe extern "C" fn hs_runs_len(runs: *const HsRunSet) -> i64 {
    if runs.is_null() {
        return -1;
    }
    (*runs).inner.len() as i64
}

/// Grid axes as a JSON object of name to value array. Free the string
/// with `hs_string_free`.
///
/// # Safety
/// `runs` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_runs_space_json(
    runs: *const HsRunSet,
    out: *mut *mut c_char,
) -> HsStatus {
    guarded(|| {
        if runs.is_null() || out.is_null() {
            set_error("handle or out pointer is null");
            return HsStatus::HsNullArg;
        }
        let mut map = serde_json::Map::new();
        for axis in (*runs).inner.space().axes() {
            map.insert(
                axis.name.clone(),
                serde_json::to_value(&axis.values).expect("axis values are plain JSON"),
            );
        }
        string_out(
            serde_json::to_string(&serde_json::Value::Object(map)).expect("plain JSON"),
            out,
        )
    })
}

/// # Safety
/// `runs` must be null or exactly as returned by `hs_runs_parse_jsonl`.
#[no_mangle]
pub unsafe extern "C" fn hs_runs_free(runs: *mut HsRunSet) {
    if !runs.is_null() {
        drop(Box::from_raw(runs));
    }
}

/// Aggregates runs into cells, drops cells past the divergence threshold,
/// and normalizes the rest into per-environment percentile bands.
///
/// # Safety
/// `runs` must be a valid handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_scores_build(
    runs: *const HsRunSet,
    div_threshold: f64,
    q_lo: f64,
    q_hi: f64,
    out: *mut *mut HsScoreTable,
) -> HsStatus {
    guarded(|| {
        if runs.is_null() || out.is_null() {
            set_error("handle or out pointer is null");
            return HsStatus::HsNullArg;
        }
        let result = build_cells(&(*runs).inner, div_threshold).and_then(|cells| {
            let norms = env_percentiles(&cells, q_lo, q_hi)?;
            normalize(&cells, &norms)
        });
        match result {
            Ok(scores) => {
                *out = Box::into_raw(Box::new(HsScoreTable { inner: scores }));
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `scores` must be null or exactly as returned by `hs_scores_build`.
#[no_mangle]
pub unsafe extern "C" fn hs_scores_free(scores: *mut HsScoreTable) {
    if !scores.is_null() {
        drop(Box::from_raw(scores));
    }
}

/// Tuning sensitivity of one algorithm as a JSON report (fields include
/// `phi`, `per_env_tuned`, `cross_env_tuned`, argmax coordinates). Free
/// the string with `hs_string_free`.
///
/// # Safety
/// `scores` and `alg` must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_sensitivity_json(
    scores: *const HsScoreTable,
    alg: *const c_char,
    out: *mut *mut c_char,
) -> HsStatus {
    guarded(|| {
        if scores.is_null() || out.is_null() {
            set_error("handle or out pointer is null");
            return HsStatus::HsNullArg;
        }
        let alg = match required_str(alg) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match sensitivity(&(*scores).inner, alg) {
            Ok(report) => string_out(
                serde_json::to_string(&report).expect("report is plain data"),
                out,
            ),
            Err(e) => status_of(&e),
        }
    })
}

/// Effective-dimensionality curve of one algorithm as JSON (fields include
/// `d` and per-size best subsets). Free the string with `hs_string_free`.
///
/// # Safety
/// `scores` and `alg` must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_dimensionality_json(
    scores: *const HsScoreTable,
    alg: *const c_char,
    threshold_fraction: f64,
    out: *mut *mut c_char,
) -> HsStatus {
    guarded(|| {
        if scores.is_null() || out.is_null() {
            set_error("handle or out pointer is null");
            return HsStatus::HsNullArg;
        }
        let alg = match required_str(alg) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match dim_curve(&(*scores).inner, alg, threshold_fraction) {
            Ok(curve) => string_out(
                serde_json::to_string(&curve).expect("curve is plain data"),
                out,
            ),
            Err(e) => status_of(&e),
        }
    })
}

/// sign(x) * ln(|x| + 1).
#[no_mangle]
pub extern "C" fn hs_symlog(x: f64) -> f64 {
    symlog(x)
}

/// Inverse of `hs_symlog`.
#[no_mangle]
pub extern "C" fn hs_symexp(x: f64) -> f64 {
    symexp(x)
}

/// Region of the performance-sensitivity plane relative to a reference:
/// 0 boundary, 1-5 the numbered regions, 6 unclassified, -1 on non-finite
/// input.
#[no_mangle]
pub extern "C" fn hs_classify_region(
    ref_phi: f64,
    ref_perf: f64,
    phi: f64,
    perf: f64,
    tol: f64,
) -> i32 {
    if ![ref_phi, ref_perf, phi, perf, tol].iter().all(|v| v.is_finite()) {
        return -1;
    }
    let reference = PlanePoint::new("ref", ref_phi, ref_perf);
    let point = PlanePoint::new("pt", phi, perf);
    match classify_region(&reference, &point, tol) {
        Region::Boundary => 0,
        Region::R1 => 1,
        Region::R2 => 2,
        Region::R3 => 3,
        Region::R4 => 4,
        Region::R5 => 5,
        Region::Unclassified => 6,
    }
}

/// Plain percentile scaler; fails on a zero spread. `decay` in (0, 1).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_scaler_new(decay: f64, out: *mut *mut HsScaler) -> HsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return HsStatus::HsNullArg;
        }
        match PercentileScaler::new(decay) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HsScaler { inner }));
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Lower-bounded percentile scaler: the divisor never falls below `bound`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_scaler_new_bounded(
    decay: f64,
    bound: f64,
    out: *mut *mut HsScaler,
) -> HsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return HsStatus::HsNullArg;
        }
        match PercentileScaler::with_lower_bound(decay, bound) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HsScaler { inner }));
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Folds a batch of returns into the scaler's band and writes the scaled
/// advantages to `out`, which must hold `n_advantages` doubles.
///
/// # Safety
/// `scaler` must be a valid handle; `returns` and `advantages` must point
/// to arrays of the stated lengths; `out` must hold `n_advantages` values.
#[no_mangle]
pub unsafe extern "C" fn hs_scaler_scale(
    scaler: *mut HsScaler,
    returns: *const f64,
    n_returns: usize,
    advantages: *const f64,
    n_advantages: usize,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        if scaler.is_null() || returns.is_null() || advantages.is_null() || out.is_null() {
            set_error("handle or array pointer is null");
            return HsStatus::HsNullArg;
        }
        let returns = std::slice::from_raw_parts(returns, n_returns);
        let advantages = std::slice::from_raw_parts(advantages, n_advantages);
        match (*scaler).inner.scale(returns, advantages) {
            Ok(scaled) => {
                std::ptr::copy_nonoverlapping(scaled.as_ptr(), out, scaled.len());
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `scaler` must be null or exactly as returned by a scaler constructor.
#[no_mangle]
pub unsafe extern "C" fn hs_scaler_free(scaler: *mut HsScaler) {
    if !scaler.is_null() {
        drop(Box::from_raw(scaler));
    }
}

/// Streaming observation normalizer; the first observation fixes the
/// dimensionality. `eps` must be positive.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hs_obsnorm_new(eps: f64, out: *mut *mut HsObsNorm) -> HsStatus {
    guarded(|| {
        if out.is_null() {
            set_error("out pointer is null");
            return HsStatus::HsNullArg;
        }
        match ObservationNormalizer::new(eps) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(HsObsNorm { inner }));
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Folds one observation into the running statistics and writes its
/// normalized form to `out`, which must hold `len` doubles.
///
/// # Safety
/// `norm` must be a valid handle; `obs` must point to `len` values; `out`
/// must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn hs_obsnorm_normalize(
    norm: *mut HsObsNorm,
    obs: *const f64,
    len: usize,
    out: *mut f64,
) -> HsStatus {
    guarded(|| {
        if norm.is_null() || obs.is_null() || out.is_null() {
            set_error("handle or array pointer is null");
            return HsStatus::HsNullArg;
        }
        let obs = std::slice::from_raw_parts(obs, len);
        match (*norm).inner.normalize(obs) {
            Ok(scaled) => {
                std::ptr::copy_nonoverlapping(scaled.as_ptr(), out, scaled.len());
                HsStatus::HsOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `norm` must be null or exactly as returned by `hs_obsnorm_new`.
#[no_mangle]
pub unsafe extern "C" fn hs_obsnorm_free(norm: *mut HsObsNorm) {
    if !norm.is_null() {
        drop(Box::from_raw(norm));
    }
}
