//! C ABI for fretwise.
//!
//! Every fallible function returns an [`FwStatus`]; on failure a message is
//! available from [`fw_last_error_message`] on the same thread. Strings
//! returned through out-parameters are owned by the library and must be
//! released with [`fw_string_free`]. Model handles are released with
//! [`fw_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use fretwise::model::{ModelError, SuggestionModel, Topology};
use fretwise::server::{SuggestResponse, SuggestionBody};
use fretwise::{metrics, parse_label, ChordLabel, Diagram, StringState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    CorruptModel = 4,
    VersionMismatch = 5,
    MalformedLabel = 6,
    MalformedFingering = 7,
    MissingContext = 8,
    InvalidArgument = 9,
    Internal = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FwTopology {
    Baseline = 0,
    Full = 1,
}

/// Opaque handle to a loaded model.
pub struct FwModel {
    inner: SuggestionModel,
}

/// Value written to `out_frets` for a muted string.
pub const FW_MUTED: i32 = -1;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(FwStatus, String);

impl Failure {
    fn label(e: fretwise::LabelError) -> Self {
        Failure(FwStatus::MalformedLabel, e.to_string())
    }

    fn fingering(e: fretwise::DiagramError) -> Self {
        Failure(FwStatus::MalformedFingering, e.to_string())
    }
}

/// Runs `f`, converting failures and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FwStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FwStatus::Internal
        }
    }
}

/// # Safety
/// `s` must be null or a valid NUL-terminated string.
unsafe fn text<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(Failure(FwStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| Failure(FwStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(FwStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a model file into `*out`.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_model_load(path: *const c_char, out: *mut *mut FwModel) -> FwStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = text(path, "path")?;
        let model = SuggestionModel::load(Path::new(path)).map_err(|e| {
            let status = match e {
                ModelError::Io(_) => FwStatus::Io,
                ModelError::VersionMismatch { .. } => FwStatus::VersionMismatch,
                _ => FwStatus::CorruptModel,
            };
            Failure(status, format!("{path}: {e}"))
        })?;
        *out = Box::into_raw(Box::new(FwModel { inner: model }));
        Ok(())
    })
}

/// Releases a model handle; null is ignored.
///
/// # Safety
/// `model` must be null or a handle from [`fw_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fw_model_free(model: *mut FwModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the model topology to `*out`.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_model_topology(model: *const FwModel, out: *mut FwTopology) -> FwStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = match (*model).inner.topology {
            Topology::Baseline => FwTopology::Baseline,
            Topology::Full => FwTopology::Full,
        };
        Ok(())
    })
}

/// Top-`k` suggestions for `label` as JSON
/// `{"suggestions": [{fingering, score, playability, unplayable, pitch_f1, chord_change_ease?}]}`.
/// `prev` may be null for the baseline model. The string written to `*out`
/// must be released with [`fw_string_free`].
///
/// # Safety
/// `model` must be a live handle, `label` a valid string, `prev` null or a
/// valid string, and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_suggest_json(
    model: *const FwModel,
    label: *const c_char,
    prev: *const c_char,
    k: u32,
    out: *mut *mut c_char,
) -> FwStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let label = parse_label(text(label, "label")?).map_err(Failure::label)?;
        let prev =
            if prev.is_null() { None } else { Some(Diagram::parse(text(prev, "prev")?).map_err(Failure::fingering)?) };
        if k == 0 {
            return Err(Failure(FwStatus::InvalidArgument, "k must be positive".into()));
        }
        let suggestions = fretwise::suggest(&(*model).inner, &label, prev.as_ref(), k as usize).map_err(|e| {
            let status = match e {
                fretwise::suggest::SuggestError::MissingContext => FwStatus::MissingContext,
                _ => FwStatus::Internal,
            };
            Failure(status, e.to_string())
        })?;
        let body = SuggestResponse { suggestions: suggestions.iter().map(SuggestionBody::from).collect() };
        let json = serde_json::to_string(&body).map_err(|e| Failure(FwStatus::Internal, e.to_string()))?;
        *out = CString::new(json).map_err(|e| Failure(FwStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library; null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fw_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a fingering such as "x.0.2.2.1.0" into six frets, low E first;
/// muted strings are written as [`FW_MUTED`].
///
/// # Safety
/// `fingering` must be a valid string and `out_frets` must point to 6 writable `int32_t`.
#[no_mangle]
pub unsafe extern "C" fn fw_parse_fingering(fingering: *const c_char, out_frets: *mut i32) -> FwStatus {
    guard(|| {
        non_null(out_frets, "out_frets")?;
        let d = Diagram::parse(text(fingering, "fingering")?).map_err(Failure::fingering)?;
        for (i, s) in d.strings().iter().enumerate() {
            *out_frets.add(i) = match s {
                StringState::Muted => FW_MUTED,
                StringState::Fret(f) => i32::from(*f),
            };
        }
        Ok(())
    })
}

/// Pitch-class F1 between a fingering and a chord label.
///
/// # Safety
/// `fingering` and `label` must be valid strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_pitch_f1(fingering: *const c_char, label: *const c_char, out: *mut f64) -> FwStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = Diagram::parse(text(fingering, "fingering")?).map_err(Failure::fingering)?;
        let l: ChordLabel = parse_label(text(label, "label")?).map_err(Failure::label)?;
        *out = metrics::pitch_scores(&d, &l).f1;
        Ok(())
    })
}

/// Anatomical playability score in [0, 1].
///
/// # Safety
/// `fingering` must be a valid string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_anatomical_score(fingering: *const c_char, out: *mut f64) -> FwStatus {
    guard(|| {
        non_null(out, "out")?;
        let d = Diagram::parse(text(fingering, "fingering")?).map_err(Failure::fingering)?;
        *out = metrics::anatomical_score(&d);
        Ok(())
    })
}

/// Ease of changing from one fingering to another, in (0, 1].
///
/// # Safety
/// `from` and `to` must be valid strings and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fw_chord_change_ease(from: *const c_char, to: *const c_char, out: *mut f64) -> FwStatus {
    guard(|| {
        non_null(out, "out")?;
        let a = Diagram::parse(text(from, "from")?).map_err(Failure::fingering)?;
        let b = Diagram::parse(text(to, "to")?).map_err(Failure::fingering)?;
        *out = metrics::chord_change_ease(&a, &b);
        Ok(())
    })
}
