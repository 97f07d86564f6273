//! C ABI over the `adhere` library.
//!
//! Every fallible call returns an [`AdhereStatus`]; on failure the message is
//! available from [`adhere_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::ptr;

use adhere::causal::{ate_comparison, AteOptions};
use adhere::cohort::io::{read_cohort, write_cohort};
use adhere::cohort::CohortRecord;
use adhere::fairness::{demographic_parity_diff, equalized_odds_diffs, GroupOutcomes};
use adhere::learners::{auroc, ForestConfig, ModelKind, TrainedModel};
use adhere::synthcohort::{generate_cohort, SynthConfig};
use adhere::Error;

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdhereStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Parse = 5,
    Separation = 6,
    Numerical = 7,
    Degenerate = 8,
    MissingData = 9,
    Infeasible = 10,
    Backend = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Synthetic or loaded cohort.
pub struct AdhereCohort {
    records: Vec<CohortRecord>,
}

/// Trained outcome classifier with its feature encoding.
pub struct AdhereModel {
    model: TrainedModel,
}

/// Classifier family for [`adhere_model_train`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdhereModelKind {
    Logistic = 0,
    Forest = 1,
}

/// Disparity metrics for one focal group against the rest. Undefined rates are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct AdhereFairness {
    pub demographic_parity: f64,
    pub tpr_diff: f64,
    pub fpr_diff: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> AdhereStatus {
    match e {
        Error::InvalidInput(_) | Error::Config(_) | Error::LengthMismatch { .. } | Error::UnseenCategory { .. } => {
            AdhereStatus::InvalidInput
        }
        Error::Io { .. } => AdhereStatus::Io,
        Error::Csv(_) | Error::Json(_) => AdhereStatus::Parse,
        Error::Separation { .. } => AdhereStatus::Separation,
        Error::Singular | Error::NotConverged { .. } | Error::Calibration(_) => AdhereStatus::Numerical,
        Error::ZeroCell | Error::Degenerate(_) | Error::SingleClass | Error::EmptyGroup(_) => {
            AdhereStatus::Degenerate
        }
        Error::MissingLabel { .. } | Error::MissingValue { .. } | Error::DuplicateEncounter { .. } => {
            AdhereStatus::MissingData
        }
        Error::Infeasible(_) => AdhereStatus::Infeasible,
        Error::ExtractionFailed { .. } | Error::Transient { .. } | Error::Backend(_) => AdhereStatus::Backend,
    }
}

enum Failure {
    Status(AdhereStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, recording any failure (including a panic) as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdhereStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdhereStatus::Ok,
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(format!("{}: {e}", e.kind()));
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            AdhereStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(AdhereStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Status(AdhereStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::Status(AdhereStatus::InvalidInput, "output contains a NUL byte".into()))
}

/// Message of the last failure on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn adhere_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn adhere_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adhere_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Draws a synthetic cohort. `config_json` may be NULL for defaults; `n` of 0
/// keeps the configured size.
///
/// # Safety
/// `config_json` must be NULL or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_generate(
    config_json: *const c_char,
    seed: u64,
    n: usize,
    out: *mut *mut AdhereCohort,
) -> AdhereStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut cfg = match opt_str_arg(config_json, "config_json")? {
            Some(s) => serde_json::from_str::<SynthConfig>(s).map_err(Error::from)?,
            None => SynthConfig::default(),
        };
        cfg.seed = seed;
        if n > 0 {
            cfg.n = n;
        }
        cfg.validate()?;
        let (records, _) = generate_cohort(&cfg)?;
        *out = Box::into_raw(Box::new(AdhereCohort { records }));
        Ok(())
    })
}

/// Reads a cohort CSV.
///
/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_read(path: *const c_char, out: *mut *mut AdhereCohort) -> AdhereStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let records = read_cohort(&path, None)?;
        *out = Box::into_raw(Box::new(AdhereCohort { records }));
        Ok(())
    })
}

/// Writes a cohort CSV.
///
/// # Safety
/// `cohort` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_write(cohort: *const AdhereCohort, path: *const c_char) -> AdhereStatus {
    guard(|| {
        let cohort = ref_arg(cohort, "cohort")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        write_cohort(&path, &cohort.records)?;
        Ok(())
    })
}

/// Number of records; 0 for NULL.
///
/// # Safety
/// `cohort` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_len(cohort: *const AdhereCohort) -> usize {
    cohort.as_ref().map_or(0, |c| c.records.len())
}

/// Number of records labeled non-adherent.
///
/// # Safety
/// `cohort` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_non_adherent(cohort: *const AdhereCohort, out: *mut usize) -> AdhereStatus {
    guard(|| {
        let cohort = ref_arg(cohort, "cohort")?;
        let out = out_arg(out, "out")?;
        *out = cohort
            .records
            .iter()
            .filter(|r| r.adherence.as_ref().is_some_and(|a| a.non_adherent))
            .count();
        Ok(())
    })
}

/// # Safety
/// `cohort` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adhere_cohort_free(cohort: *mut AdhereCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// Trains an outcome classifier on a labeled cohort with default forest settings.
///
/// # Safety
/// `cohort` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_model_train(
    cohort: *const AdhereCohort,
    kind: AdhereModelKind,
    seed: u64,
    out: *mut *mut AdhereModel,
) -> AdhereStatus {
    guard(|| {
        let cohort = ref_arg(cohort, "cohort")?;
        let out = out_arg(out, "out")?;
        let kind = match kind {
            AdhereModelKind::Logistic => ModelKind::Logistic,
            AdhereModelKind::Forest => ModelKind::Forest,
        };
        let model = TrainedModel::train(&cohort.records, kind, &ForestConfig::default(), seed)?;
        *out = Box::into_raw(Box::new(AdhereModel { model }));
        Ok(())
    })
}

/// Writes one probability per cohort record into `out`, which holds `len` values.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn adhere_model_predict_proba(
    model: *const AdhereModel,
    cohort: *const AdhereCohort,
    out: *mut f64,
    len: usize,
) -> AdhereStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let cohort = ref_arg(cohort, "cohort")?;
        if len < cohort.records.len() {
            return Err(Failure::Status(
                AdhereStatus::BufferTooSmall,
                format!("need {} slots, got {len}", cohort.records.len()),
            ));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let scores = model.model.predict_proba(&cohort.records)?;
        std::slice::from_raw_parts_mut(out, scores.len()).copy_from_slice(&scores);
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle and `path` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn adhere_model_save(model: *const AdhereModel, path: *const c_char) -> AdhereStatus {
    guard(|| {
        let model = ref_arg(model, "model")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        model.model.save(&path)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_model_load(path: *const c_char, out: *mut *mut AdhereModel) -> AdhereStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        let model = TrainedModel::load(&path)?;
        *out = Box::into_raw(Box::new(AdhereModel { model }));
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adhere_model_free(model: *mut AdhereModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve; labels are 0 or 1.
///
/// # Safety
/// `scores` and `labels` must each point to `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn adhere_auroc(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> AdhereStatus {
    guard(|| {
        let scores = slice_arg(scores, n, "scores")?;
        let labels = slice_arg(labels, n, "labels")?;
        let out = out_arg(out, "out")?;
        *out = auroc(scores, labels)?;
        Ok(())
    })
}

/// Disparities of focal-group members (`group[i] == 1`) against the rest.
///
/// # Safety
/// The three arrays must each hold `n` readable values.
#[no_mangle]
pub unsafe extern "C" fn adhere_fairness(
    group: *const u8,
    label: *const u8,
    predicted: *const u8,
    n: usize,
    out: *mut AdhereFairness,
) -> AdhereStatus {
    guard(|| {
        let g = slice_arg(group, n, "group")?;
        let y = slice_arg(label, n, "label")?;
        let p = slice_arg(predicted, n, "predicted")?;
        let out = out_arg(out, "out")?;
        let outcomes = GroupOutcomes::new(g.to_vec(), y.to_vec(), p.to_vec())?;
        let dp = demographic_parity_diff(&outcomes)?;
        let eo = equalized_odds_diffs(&outcomes);
        *out = AdhereFairness {
            demographic_parity: dp,
            tpr_diff: eo.tpr_diff.unwrap_or(f64::NAN),
            fpr_diff: eo.fpr_diff.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// Full versus adherent-only effect estimates as a JSON document. `options_json`
/// may be NULL for defaults. Free the result with [`adhere_string_free`].
///
/// # Safety
/// `cohort` must be a live handle; `options_json` NULL or a valid C string;
/// `out_json` writable.
#[no_mangle]
pub unsafe extern "C" fn adhere_ate_comparison_json(
    cohort: *const AdhereCohort,
    options_json: *const c_char,
    out_json: *mut *mut c_char,
) -> AdhereStatus {
    guard(|| {
        let cohort = ref_arg(cohort, "cohort")?;
        let out = out_arg(out_json, "out_json")?;
        let options = match opt_str_arg(options_json, "options_json")? {
            Some(s) => serde_json::from_str::<AteOptions>(s).map_err(Error::from)?,
            None => AteOptions::default(),
        };
        let report = ate_comparison(&cohort.records, &options)?;
        *out = to_c_string(serde_json::to_string(&report).map_err(Error::from)?)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_library_error_has_a_non_ok_status() {
        let errors = [
            Error::Singular,
            Error::ZeroCell,
            Error::SingleClass,
            Error::Infeasible("x".into()),
            Error::Config("x".into()),
        ];
        for e in &errors {
            assert_ne!(status_of(e), AdhereStatus::Ok);
        }
    }

    #[test]
    fn panic_is_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, AdhereStatus::Panic);
        assert!(!adhere_last_error_message().is_null());
    }
}
