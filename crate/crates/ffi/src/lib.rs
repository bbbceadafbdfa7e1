//! C ABI for the broaden-and-refine pipeline.
//!
//! The binding surface is deliberately small and string-based: a host opens
//! an opaque [`BnrPipeline`] over a corpus directory, issues plain engine
//! searches or full broaden→refine sessions, and receives results as JSON
//! strings it must release with [`bnr_string_free`]. Every call returns a
//! [`BnrStatus`]; on failure the thread-local message behind
//! [`bnr_last_error_message`] explains what went wrong.
//!
//! The matching declarations live in `include/bnr.h`, which is
//! hand-maintained — keep it in lockstep with the exported items here (the
//! `header_lists_every_exported_symbol` test holds the two together).
//!
//! Memory rules:
//! * `BnrPipeline*` is created by [`bnr_pipeline_open`] and released by
//!   [`bnr_pipeline_free`]; it is never reallocated behind the caller.
//! * Every `char*` written to an out-parameter is owned by the caller and
//!   must be passed to [`bnr_string_free`] exactly once.
//! * The pointer from [`bnr_last_error_message`] is borrowed; it stays
//!   valid until the next failing call on the same thread.
//!
//! Thread safety: a pipeline is immutable after open, so concurrent reads
//! through the same handle are safe; open/free must not race with use.

use bnr_core::catalog::{load_corpus, Catalog};
use bnr_core::cli::ExpanderSpec;
use bnr_core::engine::{build_index, Index, SearchRequest};
use bnr_core::querylang::parse;
use bnr_core::serving::{run_session, PipelineConfig};
use bnr_core::verifier::UserContext;
use bnr_core::BnrError;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Result of every FFI call. Zero is success; everything else is a failure
/// whose detail is available from [`bnr_last_error_message`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnrStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// Malformed query text.
    ParseError = 3,
    /// A configuration document or value was rejected.
    ConfigError = 4,
    /// Missing or inconsistent data (corpus, parameters, ids).
    DataError = 5,
    /// A non-finite number surfaced in the math.
    NumericError = 6,
    /// Filesystem failure.
    IoError = 7,
    /// The library caught a panic at the boundary.
    Panic = 8,
}

fn status_of(e: &BnrError) -> BnrStatus {
    match e {
        BnrError::Parse { .. } => BnrStatus::ParseError,
        BnrError::Config(_) => BnrStatus::ConfigError,
        BnrError::Data(_) | BnrError::Json(_) => BnrStatus::DataError,
        BnrError::Numeric(_) => BnrStatus::NumericError,
        BnrError::Io(_) => BnrStatus::IoError,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<Vec<u8>>) {
    let message = CString::new(message).unwrap_or_else(|_| {
        CString::new("error message contained an interior NUL byte").expect("static message")
    });
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

/// An opened pipeline: immutable corpus, its index, and the serving
/// configuration. Opaque across the boundary.
pub struct BnrPipeline {
    catalog: Catalog,
    index: Index,
    config: PipelineConfig,
    user: UserContext,
}

/// Reads a required string argument, recording an error on failure.
///
/// # Safety
/// `ptr` must be null or point to a NUL-terminated string.
unsafe fn required_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, BnrStatus> {
    if ptr.is_null() {
        set_last_error(format!("{what} must not be null"));
        return Err(BnrStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_last_error(format!("{what} is not valid UTF-8"));
        BnrStatus::InvalidUtf8
    })
}

/// Hands a JSON string to the caller through `out`.
fn emit_string(json: String, out: *mut *mut c_char) -> BnrStatus {
    let Ok(cstring) = CString::new(json) else {
        set_last_error("result contained an interior NUL byte");
        return BnrStatus::DataError;
    };
    unsafe { *out = cstring.into_raw() };
    BnrStatus::Ok
}

fn catch_panic(status: &mut BnrStatus, f: impl FnOnce() -> BnrStatus) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => *status = s,
        Err(_) => {
            set_last_error("internal panic caught at the FFI boundary");
            *status = BnrStatus::Panic;
        }
    }
}

/// Opens a pipeline over the corpus directory written by `bnr gen-corpus`.
/// `config_json` may be null for the default serving configuration, or a
/// JSON document in the `PipelineConfig` shape. Returns null on failure and
/// records the reason for [`bnr_last_error_message`].
///
/// # Safety
/// `corpus_dir` and `config_json` must each be null or point to a
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bnr_pipeline_open(
    corpus_dir: *const c_char,
    config_json: *const c_char,
) -> *mut BnrPipeline {
    let mut result: *mut BnrPipeline = std::ptr::null_mut();
    let mut status = BnrStatus::Ok;
    catch_panic(&mut status, || {
        let dir = match required_str(corpus_dir, "corpus_dir") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let config = if config_json.is_null() {
            PipelineConfig::default()
        } else {
            let text = match required_str(config_json, "config_json") {
                Ok(s) => s,
                Err(status) => return status,
            };
            match serde_json::from_str::<PipelineConfig>(text) {
                Ok(cfg) => cfg,
                Err(e) => {
                    set_last_error(format!("config_json: {e}"));
                    return BnrStatus::ConfigError;
                }
            }
        };
        if let Err(e) = config.validate() {
            set_last_error(format!("config_json: {e}"));
            return BnrStatus::ConfigError;
        }
        let catalog = match load_corpus(Path::new(dir)) {
            Ok(c) => c,
            Err(e) => {
                set_last_error(format!("corpus {dir}: {e}"));
                return status_of(&e);
            }
        };
        let index = match build_index(&catalog) {
            Ok(i) => i,
            Err(e) => {
                set_last_error(format!("index build: {e}"));
                return status_of(&e);
            }
        };
        result = Box::into_raw(Box::new(BnrPipeline {
            catalog,
            index,
            config,
            user: UserContext::default(),
        }));
        BnrStatus::Ok
    });
    result
}

/// Releases a pipeline. Null is a no-op.
///
/// # Safety
/// `pipeline` must be null or a pointer returned by [`bnr_pipeline_open`]
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn bnr_pipeline_free(pipeline: *mut BnrPipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

/// Runs one engine search (no expansion, no verification) and writes a JSON
/// object `{"query", "item_ids", "total_matches"}` to `*out_json`.
///
/// # Safety
/// `pipeline` must be a live pointer from [`bnr_pipeline_open`]; `query`
/// must be null or NUL-terminated; `out_json` must be a valid writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn bnr_search_json(
    pipeline: *const BnrPipeline,
    query: *const c_char,
    limit: usize,
    offset: usize,
    out_json: *mut *mut c_char,
) -> BnrStatus {
    let mut status = BnrStatus::Ok;
    catch_panic(&mut status, || {
        if pipeline.is_null() || out_json.is_null() {
            set_last_error("pipeline and out_json must not be null");
            return BnrStatus::NullArgument;
        }
        let pipeline = &*pipeline;
        let text = match required_str(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let q = match parse(text) {
            Ok(q) => q,
            Err(e) => {
                set_last_error(format!("query: {e}"));
                return status_of(&e);
            }
        };
        let request = SearchRequest { rewrite: q.to_rewrite(), limit, offset };
        let result = match pipeline.index.search(&request) {
            Ok(r) => r,
            Err(e) => {
                set_last_error(format!("search: {e}"));
                return status_of(&e);
            }
        };
        let json = serde_json::json!({
            "query": q.serialize(),
            "item_ids": result.item_ids,
            "total_matches": result.total_matches,
        });
        emit_string(json.to_string(), out_json)
    });
    status
}

/// Runs a full broaden→refine session and writes the session report JSON to
/// `*out_json`. `expander_json` may be null (enumerative with the default
/// rewrite count) or a document in the `ExpanderSpec` shape, e.g.
/// `{"kind":"enumerative","n":4}` or
/// `{"kind":"policy","params_path":"…","seed":0}`.
///
/// # Safety
/// Pointer requirements as in [`bnr_search_json`]; `expander_json` must be
/// null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn bnr_run_session_json(
    pipeline: *const BnrPipeline,
    query: *const c_char,
    expander_json: *const c_char,
    out_json: *mut *mut c_char,
) -> BnrStatus {
    let mut status = BnrStatus::Ok;
    catch_panic(&mut status, || {
        if pipeline.is_null() || out_json.is_null() {
            set_last_error("pipeline and out_json must not be null");
            return BnrStatus::NullArgument;
        }
        let pipeline = &*pipeline;
        let text = match required_str(query, "query") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let q = match parse(text) {
            Ok(q) => q,
            Err(e) => {
                set_last_error(format!("query: {e}"));
                return status_of(&e);
            }
        };
        let spec = if expander_json.is_null() {
            ExpanderSpec::default()
        } else {
            let text = match required_str(expander_json, "expander_json") {
                Ok(s) => s,
                Err(status) => return status,
            };
            match serde_json::from_str::<ExpanderSpec>(text) {
                Ok(spec) => spec,
                Err(e) => {
                    set_last_error(format!("expander_json: {e}"));
                    return BnrStatus::ConfigError;
                }
            }
        };
        let expander = match spec.build() {
            Ok(e) => e,
            Err(e) => {
                set_last_error(format!("expander_json: {e}"));
                return status_of(&e);
            }
        };
        let report = match run_session(
            &q,
            &pipeline.user,
            &expander,
            &pipeline.index,
            &pipeline.catalog,
            &pipeline.config,
        ) {
            Ok(r) => r,
            Err(e) => {
                set_last_error(format!("session: {e}"));
                return status_of(&e);
            }
        };
        match serde_json::to_string(&report) {
            Ok(json) => emit_string(json, out_json),
            Err(e) => {
                set_last_error(format!("session serialization: {e}"));
                BnrStatus::DataError
            }
        }
    });
    status
}

/// Releases a string produced by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a pointer written by this library that has not been
/// freed yet.
#[no_mangle]
pub unsafe extern "C" fn bnr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The message of the most recent failure on this thread, or null if no
/// call has failed yet. Borrowed — do not free; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn bnr_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow().as_ref().map(|msg| msg.as_ptr()).unwrap_or(std::ptr::null())
    })
}
