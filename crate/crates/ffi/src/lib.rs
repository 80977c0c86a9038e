//! C ABI over the countermeasure: load a trained model, score audio, and
//! compute equal error rates.
//!
//! Every fallible function returns a [`CqccStatus`] and writes its result
//! through an out-pointer only on success. The message of the most recent
//! failure on the calling thread is available from [`cqcc_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cqcc_artifact::audio::AudioSignal;
use cqcc_artifact::detector::{load_model, DetectorModel};
use cqcc_artifact::metrics::{compute_eer, machine_opinion_score};
use cqcc_artifact::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqccStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    FileNotFound = 3,
    Io = 4,
    UnsupportedAudio = 5,
    InvalidSignal = 6,
    InvalidConfig = 7,
    ModelFormat = 8,
    EmptyPopulation = 9,
    Numerical = 10,
    Internal = 11,
}

impl From<&Error> for CqccStatus {
    fn from(e: &Error) -> Self {
        match e.root() {
            Error::FileNotFound(_) => Self::FileNotFound,
            Error::Io { .. } | Error::Cache(_) => Self::Io,
            Error::UnsupportedFormat(_) | Error::UnsupportedChannels(_) | Error::CorruptHeader(_) => {
                Self::UnsupportedAudio
            }
            Error::InvalidRate(_) | Error::EmptySignal | Error::SignalTooShort { .. } => Self::InvalidSignal,
            Error::InvalidConfig(_) | Error::TooFewBins(_) | Error::GridTooSmall { .. } => Self::InvalidConfig,
            Error::VersionMismatch { .. } | Error::Schema(_) => Self::ModelFormat,
            Error::EmptyPopulation(_) => Self::EmptyPopulation,
            Error::Numerical(_) | Error::DegenerateData | Error::DimMismatch { .. } => Self::Numerical,
            _ => Self::Internal,
        }
    }
}

/// Opaque handle to a loaded detector model.
pub struct CqccModel {
    inner: DetectorModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

/// Run `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (CqccStatus, String)>) -> CqccStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqccStatus::Ok,
        Ok(Err((status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            CqccStatus::Internal
        }
    }
}

fn fail(e: Error) -> (CqccStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(name: &str) -> (CqccStatus, String) {
    (CqccStatus::NullArgument, format!("{name} is null"))
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn path_arg<'a>(s: *const c_char, name: &str) -> Result<&'a Path, (CqccStatus, String)> {
    if s.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(s)
        .to_str()
        .map(Path::new)
        .map_err(|_| (CqccStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

/// # Safety
/// `data` must be null only when `len` is 0, otherwise valid for `len` reads.
unsafe fn slice_arg<'a>(data: *const f64, len: usize, name: &str) -> Result<&'a [f64], (CqccStatus, String)> {
    match (data.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(name)),
        (false, _) => Ok(std::slice::from_raw_parts(data, len)),
    }
}

/// Message of the last failure on this thread, empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cqcc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Load a model file. On success `*out` owns a handle to release with
/// [`cqcc_model_free`].
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_load(path: *const c_char, out: *mut *mut CqccModel) -> CqccStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path, "path")?;
        let inner = load_model(path).map_err(fail)?;
        *out = Box::into_raw(Box::new(CqccModel { inner }));
        Ok(())
    })
}

/// Release a handle from [`cqcc_model_load`]. Null is ignored.
///
/// # Safety
/// `model` must be null or a live handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_free(model: *mut CqccModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Sample rate the model's front end analyses at; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_sample_rate(model: *const CqccModel) -> u32 {
    model.as_ref().map_or(0, |m| m.inner.feature_config().sample_rate)
}

/// Shortest input, in samples at the model's rate, that can be scored.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_min_samples(model: *const CqccModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.feature_config().min_samples())
}

/// Log-likelihood ratio of a mono WAV file; higher means more natural.
///
/// # Safety
/// `model` must be a live handle, `path` a NUL-terminated string and
/// `out_llr` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_score_wav(
    model: *const CqccModel,
    path: *const c_char,
    out_llr: *mut f64,
) -> CqccStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_llr.is_null() {
            return Err(null("out_llr"));
        }
        let path = path_arg(path, "path")?;
        let id = path.display().to_string();
        let signal = cqcc_artifact::audio::read_wav(path).map_err(fail)?;
        *out_llr = model.inner.llr_signal(&signal, &id).map_err(fail)?;
        Ok(())
    })
}

/// Log-likelihood ratio of mono samples in [-1, 1]; resampled if
/// `sample_rate` differs from the model's.
///
/// # Safety
/// `model` must be a live handle, `samples` valid for `len` reads and
/// `out_llr` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn cqcc_model_score_samples(
    model: *const CqccModel,
    samples: *const f64,
    len: usize,
    sample_rate: u32,
    out_llr: *mut f64,
) -> CqccStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if out_llr.is_null() {
            return Err(null("out_llr"));
        }
        let samples = slice_arg(samples, len, "samples")?;
        let signal = AudioSignal::new(samples.to_vec(), sample_rate).map_err(fail)?;
        *out_llr = model.inner.llr_signal(&signal, "samples").map_err(fail)?;
        Ok(())
    })
}

/// Equal error rate in percent and its threshold. Bona fide trials are
/// expected to score higher than spoofed ones.
///
/// # Safety
/// `bona` and `spoof` must be valid for their lengths; the out-pointers
/// must be writable, `out_threshold` may be null.
#[no_mangle]
pub unsafe extern "C" fn cqcc_eer(
    bona: *const f64,
    n_bona: usize,
    spoof: *const f64,
    n_spoof: usize,
    out_eer_percent: *mut f64,
    out_threshold: *mut f64,
) -> CqccStatus {
    guard(|| {
        if out_eer_percent.is_null() {
            return Err(null("out_eer_percent"));
        }
        let bona = slice_arg(bona, n_bona, "bona")?;
        let spoof = slice_arg(spoof, n_spoof, "spoof")?;
        let res = compute_eer(bona, spoof).map_err(fail)?;
        *out_eer_percent = res.eer_percent;
        if !out_threshold.is_null() {
            *out_threshold = res.threshold;
        }
        Ok(())
    })
}

/// Opinion-scale rendering of an EER in percent, clamped to [0, 5].
#[no_mangle]
pub extern "C" fn cqcc_machine_opinion_score(eer_percent: f64) -> f64 {
    machine_opinion_score(eer_percent)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cqcc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
