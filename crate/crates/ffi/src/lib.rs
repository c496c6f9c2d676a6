//! C ABI over the padkit score metrics and embedding reader.
//!
//! Every fallible function returns a [`PadStatus`]; on failure a message is
//! available from [`padkit_last_error`] on the same thread. Handles are
//! opaque and must be released with their matching `_free` function.
//! Strings returned through out-parameters are owned by the caller and
//! released with [`padkit_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use padkit::embedding::EmbeddingError;
use padkit::metrics::{self, MetricsError, PaiScope};
use padkit::scores::ScoreError;
use padkit::{EmbeddingSet, Label, PaiSpecies, ScoreEntry, ScoreSet};

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PadStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    /// Malformed score CSV or embedding file.
    Format = 4,
    /// The score set cannot produce the requested metric.
    Metrics = 5,
    Panic = 6,
}

/// Opaque collection of labelled scores.
pub struct PadScoreSet {
    inner: ScoreSet,
}

/// Opaque embedding file contents.
pub struct PadEmbeddingSet {
    inner: EmbeddingSet,
}

/// BPCER at the largest threshold whose APCER does not exceed the target.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadOperatingPoint {
    pub apcer_target: f64,
    pub bpcer: f64,
    pub apcer: f64,
    pub tau: f64,
    /// True when no threshold meets the target.
    pub unattained: bool,
}

/// Equal error rate with its interpolated and sweep thresholds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PadEer {
    pub value: f64,
    pub tau: f64,
    pub sweep_tau: f64,
}

struct Failure {
    status: PadStatus,
    message: String,
}

impl Failure {
    fn new(status: PadStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Failure::new(PadStatus::NullPointer, format!("{what} is null"))
    }
}

impl From<ScoreError> for Failure {
    fn from(e: ScoreError) -> Self {
        let status = match e {
            ScoreError::Io(_) => PadStatus::Io,
            ScoreError::OutOfRange { .. } | ScoreError::LabelSpecies(_) => {
                PadStatus::InvalidArgument
            }
            _ => PadStatus::Format,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<EmbeddingError> for Failure {
    fn from(e: EmbeddingError) -> Self {
        let status = match e {
            EmbeddingError::Io(_) => PadStatus::Io,
            _ => PadStatus::Format,
        };
        Failure::new(status, e.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(e: MetricsError) -> Self {
        Failure::new(PadStatus::Metrics, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PadStatus {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|payload| {
        let msg = payload
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| payload.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(Failure::new(PadStatus::Panic, format!("panic: {msg}")))
    });
    match result {
        Ok(()) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PadStatus::Ok
        }
        Err(f) => {
            set_last_error(&f.message);
            f.status
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::new(PadStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn scope_arg(p: *const c_char) -> Result<PaiScope, Failure> {
    if p.is_null() {
        return Ok(PaiScope::Pooled);
    }
    str_arg(p, "scope")?
        .parse()
        .map_err(|e: String| Failure::new(PadStatus::InvalidArgument, e))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn scores_ref<'a>(p: *const PadScoreSet) -> Result<&'a ScoreSet, Failure> {
    p.as_ref()
        .map(|s| &s.inner)
        .ok_or_else(|| Failure::null("score set"))
}

unsafe fn embeddings_ref<'a>(p: *const PadEmbeddingSet) -> Result<&'a EmbeddingSet, Failure> {
    p.as_ref()
        .map(|s| &s.inner)
        .ok_or_else(|| Failure::null("embedding set"))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure::new(PadStatus::InvalidArgument, "string contains a nul byte"))
}

/// Message for the most recent failure on this thread, or null after a
/// success. The pointer stays valid until the next padkit call on the thread.
#[no_mangle]
pub extern "C" fn padkit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn padkit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn padkit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// New empty score set. Never returns null.
#[no_mangle]
pub extern "C" fn padkit_scores_new() -> *mut PadScoreSet {
    Box::into_raw(Box::new(PadScoreSet {
        inner: ScoreSet::default(),
    }))
}

/// # Safety
/// `set` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn padkit_scores_free(set: *mut PadScoreSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Appends one presentation. `species` is ignored for bona fide entries and
/// required for attacks.
///
/// # Safety
/// `set` must be a live handle; string arguments must be null or valid
/// nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn padkit_scores_push(
    set: *mut PadScoreSet,
    sample_id: *const c_char,
    is_attack: bool,
    species: *const c_char,
    score: f64,
) -> PadStatus {
    guard(|| {
        let set = out_arg(set, "score set")?;
        let sample_id = str_arg(sample_id, "sample_id")?.to_string();
        let (label, pai_species) = if is_attack {
            let name = str_arg(species, "species")?;
            (Label::Attack, PaiSpecies::parse(name))
        } else {
            (Label::BonaFide, PaiSpecies::None)
        };
        set.inner.push(ScoreEntry {
            sample_id,
            label,
            pai_species,
            score,
        })?;
        Ok(())
    })
}

/// Reads a `sample_id,label,pai_species,score` CSV file.
///
/// # Safety
/// `path` must be a valid nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn padkit_scores_load(
    path: *const c_char,
    out: *mut *mut PadScoreSet,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = ScoreSet::read(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PadScoreSet { inner }));
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn padkit_scores_len(set: *const PadScoreSet, out: *mut usize) -> PadStatus {
    guard(|| {
        *out_arg(out, "out")? = scores_ref(set)?.len();
        Ok(())
    })
}

/// Equal error rate. `scope` is `pooled`, `worst-case`, `species:<name>` or
/// null for pooled.
///
/// # Safety
/// `set` must be a live handle, `scope` null or a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_eer(
    set: *const PadScoreSet,
    scope: *const c_char,
    out: *mut PadEer,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = metrics::eer(scores_ref(set)?, &scope_arg(scope)?)?;
        *out = PadEer {
            value: e.value,
            tau: e.tau,
            sweep_tau: e.sweep_tau,
        };
        Ok(())
    })
}

/// BPCER at an APCER target in `[0, 1]`, e.g. 0.1 for BPCER10.
///
/// # Safety
/// `set` must be a live handle, `scope` null or a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_bpcer_at_apcer(
    set: *const PadScoreSet,
    apcer_target: f64,
    scope: *const c_char,
    out: *mut PadOperatingPoint,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if !(0.0..=1.0).contains(&apcer_target) {
            return Err(Failure::new(
                PadStatus::InvalidArgument,
                format!("apcer_target {apcer_target} outside [0, 1]"),
            ));
        }
        let p = metrics::bpcer_at_apcer(scores_ref(set)?, apcer_target, &scope_arg(scope)?)?;
        *out = PadOperatingPoint {
            apcer_target: p.apcer_target,
            bpcer: p.bpcer,
            apcer: p.apcer,
            tau: p.tau,
            unattained: p.unattained,
        };
        Ok(())
    })
}

/// APCER of one species at `tau` (scores below `tau` count as accepted).
///
/// # Safety
/// `set` must be a live handle, `species` a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_apcer(
    set: *const PadScoreSet,
    tau: f64,
    species: *const c_char,
    out: *mut f64,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let species = PaiSpecies::parse(str_arg(species, "species")?);
        *out = metrics::apcer(scores_ref(set)?, tau, &species)?;
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_bpcer(
    set: *const PadScoreSet,
    tau: f64,
    out: *mut f64,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = metrics::bpcer(scores_ref(set)?, tau)?;
        Ok(())
    })
}

/// Maximum per-species APCER at `tau`. When `species_out` is non-null it
/// receives the species name, to be freed with [`padkit_string_free`].
///
/// # Safety
/// `set` must be a live handle, `out` writable, `species_out` null or writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_worst_case_apcer(
    set: *const PadScoreSet,
    tau: f64,
    out: *mut f64,
    species_out: *mut *mut c_char,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let (apcer, species) = metrics::worst_case_apcer(scores_ref(set)?, tau)?;
        if let Some(slot) = species_out.as_mut() {
            *slot = into_c_string(species.name().to_string())?;
        }
        *out = apcer;
        Ok(())
    })
}

/// Full metrics report as a JSON string, freed with [`padkit_string_free`].
///
/// # Safety
/// `set` must be a live handle, `scope` null or a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_report_json(
    set: *const PadScoreSet,
    scope: *const c_char,
    out: *mut *mut c_char,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let report = metrics::full_report(scores_ref(set)?, &scope_arg(scope)?)?;
        let json = serde_json::to_string(&report)
            .map_err(|e| Failure::new(PadStatus::Format, e.to_string()))?;
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Reads and validates a binary embedding file.
///
/// # Safety
/// `path` must be a valid nul-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_read(
    path: *const c_char,
    out: *mut *mut PadEmbeddingSet,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let inner = padkit::read_embeddings(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(PadEmbeddingSet { inner }));
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_free(set: *mut PadEmbeddingSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_dim(
    set: *const PadEmbeddingSet,
    out: *mut usize,
) -> PadStatus {
    guard(|| {
        *out_arg(out, "out")? = embeddings_ref(set)?.dim;
        Ok(())
    })
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_n_samples(
    set: *const PadEmbeddingSet,
    out: *mut usize,
) -> PadStatus {
    guard(|| {
        *out_arg(out, "out")? = embeddings_ref(set)?.n_samples();
        Ok(())
    })
}

/// Augmented rows stored per sample in addition to the clean row.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_replicas(
    set: *const PadEmbeddingSet,
    out: *mut usize,
) -> PadStatus {
    guard(|| {
        *out_arg(out, "out")? = embeddings_ref(set)?.augmented_replicas;
        Ok(())
    })
}

/// Borrowed pointer to `dim` floats of one row; replica 0 is the clean row.
/// Valid until the set is freed.
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_row(
    set: *const PadEmbeddingSet,
    sample: usize,
    replica: usize,
    out: *mut *const f32,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = embeddings_ref(set)?;
        if sample >= e.n_samples() || replica >= e.rows_per_sample() {
            return Err(Failure::new(
                PadStatus::InvalidArgument,
                format!(
                    "row ({sample}, {replica}) outside {} samples x {} rows",
                    e.n_samples(),
                    e.rows_per_sample()
                ),
            ));
        }
        *out = e.row(sample, replica).as_ptr();
        Ok(())
    })
}

/// Sample id at `index`, freed with [`padkit_string_free`].
///
/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn padkit_embeddings_sample_id(
    set: *const PadEmbeddingSet,
    index: usize,
    out: *mut *mut c_char,
) -> PadStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let e = embeddings_ref(set)?;
        let id = e.sample_ids.get(index).ok_or_else(|| {
            Failure::new(
                PadStatus::InvalidArgument,
                format!("index {index} outside {} samples", e.n_samples()),
            )
        })?;
        *out = into_c_string(id.clone())?;
        Ok(())
    })
}
