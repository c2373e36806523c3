//! C ABI over the any-to-many generation toolkit.
//!
//! Conventions:
//! * Strings cross the boundary as NUL-terminated UTF-8. Every `char*`
//!   returned through an out-parameter is owned by the caller and must
//!   be released with [`spider_string_free`].
//! * Functions return a [`SpiderStatus`]; on any non-OK status the
//!   thread-local error message is readable via
//!   [`spider_last_error_message`].
//! * Structured data is exchanged as JSON documents matching the
//!   library's serde layouts (questions, answers, pipeline results).
//! * `SpiderEngine` is an opaque handle bundling a trained checkpoint,
//!   an asset gallery, the mock encoders, and the builtin planner.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use spider_core::controller::load_checkpoint;
use spider_core::pipeline::{run_pipeline, Gallery, MockEncoders, PipelineError, Planner};
use spider_core::template::{
    parse_answer, parse_question, serialize_answer, serialize_question, validate_answer_against_task,
    AnswerMessage, QuestionMessage, TaskPrompt,
};

/// Status codes returned by every FFI entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpiderStatus {
    Ok = 0,
    /// Unexpected internal failure (a bug; see the error message).
    Internal = 1,
    /// The input string does not parse under the template grammar.
    Parse = 2,
    /// No registered instruction pattern matches the question.
    Plan = 3,
    /// File system or serialization failure.
    Io = 4,
    /// Null pointer, invalid UTF-8, or otherwise unusable argument.
    InvalidArg = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("error").expect("static"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn fail(status: SpiderStatus, message: String) -> SpiderStatus {
    set_error(message);
    status
}

/// The most recent error message raised on this thread, or NULL when no
/// error has occurred. The caller owns the returned string.
#[no_mangle]
pub extern "C" fn spider_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|c| c.clone().into_raw())
            .unwrap_or(ptr::null_mut())
    })
}

/// Release a string allocated by this library.
///
/// # Safety
/// `s` must be NULL or a pointer previously returned by one of this
/// library's functions, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spider_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn read_str<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SpiderStatus> {
    if ptr.is_null() {
        set_error(format!("{what} is NULL"));
        return Err(SpiderStatus::InvalidArg);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not UTF-8"));
        SpiderStatus::InvalidArg
    })
}

fn write_out(out: *mut *mut c_char, payload: String) -> SpiderStatus {
    if out.is_null() {
        return fail(SpiderStatus::InvalidArg, "out pointer is NULL".into());
    }
    match CString::new(payload) {
        Ok(c) => {
            unsafe { *out = c.into_raw() };
            SpiderStatus::Ok
        }
        Err(_) => fail(SpiderStatus::Internal, "payload contains NUL".into()),
    }
}

fn guarded(f: impl FnOnce() -> SpiderStatus) -> SpiderStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(SpiderStatus::Internal, "panic across FFI boundary".into()),
    }
}

/// Parse a question string; on success `*out_json` holds the parsed
/// structure as JSON.
///
/// # Safety
/// `question` must be a valid NUL-terminated string and `out_json` a
/// valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_parse_question_json(
    question: *const c_char,
    out_json: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        let text = match read_str(question, "question") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_question(text) {
            Ok(message) => write_out(out_json, serde_json::to_string(&message).expect("to json")),
            Err(e) => fail(SpiderStatus::Parse, e.to_string()),
        }
    })
}

/// Parse an answer string; on success `*out_json` holds the parsed
/// structure as JSON.
///
/// # Safety
/// `answer` must be a valid NUL-terminated string and `out_json` a
/// valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_parse_answer_json(
    answer: *const c_char,
    out_json: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        let text = match read_str(answer, "answer") {
            Ok(t) => t,
            Err(status) => return status,
        };
        match parse_answer(text) {
            Ok(message) => write_out(out_json, serde_json::to_string(&message).expect("to json")),
            Err(e) => fail(SpiderStatus::Parse, e.to_string()),
        }
    })
}

/// Serialize a question JSON document back to its canonical string.
///
/// # Safety
/// `question_json` must be a valid NUL-terminated string and `out` a
/// valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_serialize_question(
    question_json: *const c_char,
    out: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        let text = match read_str(question_json, "question_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let message: QuestionMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return fail(SpiderStatus::InvalidArg, format!("question_json: {e}")),
        };
        write_out(out, serialize_question(&message))
    })
}

/// Serialize an answer JSON document back to its canonical string.
///
/// # Safety
/// `answer_json` must be a valid NUL-terminated string and `out` a
/// valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_serialize_answer(
    answer_json: *const c_char,
    out: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        let text = match read_str(answer_json, "answer_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let message: AnswerMessage = match serde_json::from_str(text) {
            Ok(m) => m,
            Err(e) => return fail(SpiderStatus::InvalidArg, format!("answer_json: {e}")),
        };
        match serialize_answer(&message) {
            Ok(s) => write_out(out, s),
            Err(e) => fail(SpiderStatus::InvalidArg, e.to_string()),
        }
    })
}

/// Validate an answer string against a task prompt name (e.g. "IMAGE",
/// "SMARTMULTIMODAL"). `*out_violations_json` receives a JSON array of
/// human-readable violation strings (empty = valid).
///
/// # Safety
/// Both strings must be valid NUL-terminated strings and
/// `out_violations_json` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_validate_answer(
    task_name: *const c_char,
    answer: *const c_char,
    out_violations_json: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        let task_text = match read_str(task_name, "task_name") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let answer_text = match read_str(answer, "answer") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let Some(task) = TaskPrompt::from_name(task_text) else {
            return fail(
                SpiderStatus::InvalidArg,
                format!("unknown task prompt `{task_text}`"),
            );
        };
        let message = match parse_answer(answer_text) {
            Ok(m) => m,
            Err(e) => return fail(SpiderStatus::Parse, e.to_string()),
        };
        let violations: Vec<String> = validate_answer_against_task(task, &message)
            .iter()
            .map(|v| v.to_string())
            .collect();
        write_out(
            out_violations_json,
            serde_json::to_string(&violations).expect("to json"),
        )
    })
}

/// Opaque pipeline handle: checkpoint + gallery + encoders + planner.
pub struct SpiderEngine {
    controller: spider_core::controller::Controller,
    gallery: Gallery,
    encoders: MockEncoders,
    planner: Planner,
}

/// Load an engine from a checkpoint and a gallery JSONL file. On
/// success `*out_engine` owns the handle; release it with
/// [`spider_engine_free`].
///
/// # Safety
/// Both paths must be valid NUL-terminated strings and `out_engine` a
/// valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_engine_new(
    ckpt_path: *const c_char,
    gallery_path: *const c_char,
    out_engine: *mut *mut SpiderEngine,
) -> SpiderStatus {
    guarded(|| {
        let ckpt = match read_str(ckpt_path, "ckpt_path") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let gallery_file = match read_str(gallery_path, "gallery_path") {
            Ok(t) => t,
            Err(status) => return status,
        };
        if out_engine.is_null() {
            return fail(SpiderStatus::InvalidArg, "out_engine is NULL".into());
        }
        let controller = match load_checkpoint(Path::new(ckpt)) {
            Ok(c) => c,
            Err(e) => return fail(SpiderStatus::Io, e.to_string()),
        };
        let encoders = MockEncoders::new(controller.config.d, controller.config.d_c);
        let gallery = match Gallery::load(Path::new(gallery_file), &encoders) {
            Ok(g) => g,
            Err(e) => return fail(SpiderStatus::Io, e.to_string()),
        };
        let engine = Box::new(SpiderEngine {
            controller,
            gallery,
            encoders,
            planner: Planner::with_builtin_pools(),
        });
        *out_engine = Box::into_raw(engine);
        SpiderStatus::Ok
    })
}

/// Number of gallery assets held by the engine (handy as a load check).
///
/// # Safety
/// `engine` must be a live handle from [`spider_engine_new`].
#[no_mangle]
pub unsafe extern "C" fn spider_engine_asset_count(engine: *const SpiderEngine) -> c_int {
    if engine.is_null() {
        return -1;
    }
    (*engine).gallery.len() as c_int
}

/// Run one question through the pipeline. `*out_result_json` receives
/// the pipeline result (answer, realized assets with cosine scores, and
/// per-group control embeddings) as JSON.
///
/// # Safety
/// `engine` must be a live handle, `question` a valid NUL-terminated
/// string, and `out_result_json` a valid pointer slot.
#[no_mangle]
pub unsafe extern "C" fn spider_engine_run(
    engine: *const SpiderEngine,
    question: *const c_char,
    out_result_json: *mut *mut c_char,
) -> SpiderStatus {
    guarded(|| {
        if engine.is_null() {
            return fail(SpiderStatus::InvalidArg, "engine is NULL".into());
        }
        let text = match read_str(question, "question") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let e = &*engine;
        match run_pipeline(text, &e.controller, &e.gallery, &e.encoders, &e.planner) {
            Ok(result) => write_out(
                out_result_json,
                serde_json::to_string(&result).expect("to json"),
            ),
            Err(PipelineError::Parse(p)) => fail(SpiderStatus::Parse, p.to_string()),
            Err(PipelineError::Plan(p)) => fail(SpiderStatus::Plan, p.to_string()),
            Err(other) => fail(SpiderStatus::Internal, other.to_string()),
        }
    })
}

/// Release an engine handle.
///
/// # Safety
/// `engine` must be NULL or a handle from [`spider_engine_new`], not
/// yet freed.
#[no_mangle]
pub unsafe extern "C" fn spider_engine_free(engine: *mut SpiderEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}
