//! C interface to the sqlcex checker.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Functions returning `SqlcexStatus` report failures through the status
//! code; the message of the last failure on the calling thread is
//! available from `sqlcex_last_error`. Strings returned to the caller are
//! owned by it and released with `sqlcex_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sqlcex::encode::TieMode;
use sqlcex::harness;
use sqlcex::pipeline::{eqcheck, InconclusiveReason, Prepared, TaskConfig, ValidationBackend, Verdict};
use sqlcex::schema::{load_schema, DatabaseSchema};
use sqlcex::solver::SolveBudget;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlcexStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Schema = 3,
    Parse = 4,
    Dump = 5,
    Evaluation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlcexVerdict {
    EquivalentUpTo = 0,
    NotEquivalent = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlcexReason {
    None = 0,
    Timeout = 1,
    Unsupported = 2,
    BoundOverflow = 3,
    SpuriousOnly = 4,
    SolverError = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqlcexBackend {
    Reference = 0,
    Sqlite = 1,
}

/// Settings for `sqlcex_check`. Fill with `sqlcex_config_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SqlcexConfig {
    pub max_bound: u32,
    pub timeout_secs: f64,
    pub exclude_degenerate: bool,
    /// A `SqlcexBackend` value; unknown values mean the reference evaluator.
    pub validation_backend: u32,
    /// Let the solver order ties freely instead of by input order.
    pub arbitrary_ties: bool,
}

/// A parsed database schema.
pub struct SqlcexSchema {
    inner: DatabaseSchema,
}

/// The outcome of one check.
pub struct SqlcexResult {
    schema: DatabaseSchema,
    verdict: Verdict,
    elapsed: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: SqlcexStatus, msg: impl Into<String>) -> SqlcexStatus {
    set_error(msg);
    status
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, SqlcexStatus> {
    if p.is_null() {
        return Err(fail(SqlcexStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SqlcexStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn guard(f: impl FnOnce() -> Result<(), SqlcexStatus>) -> SqlcexStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SqlcexStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(SqlcexStatus::Panic, "internal panic"),
    }
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Version string of the library; static, do not free.
#[no_mangle]
pub extern "C" fn sqlcex_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. Free with
/// `sqlcex_string_free`.
#[no_mangle]
pub extern "C" fn sqlcex_last_error() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_config_default(out: *mut SqlcexConfig) {
    if out.is_null() {
        return;
    }
    let d = TaskConfig::default();
    *out = SqlcexConfig {
        max_bound: d.max_bound as u32,
        timeout_secs: d.budget.cpu_seconds,
        exclude_degenerate: d.exclude_degenerate,
        validation_backend: SqlcexBackend::Reference as u32,
        arbitrary_ties: false,
    };
}

/// Parses a JSON schema.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_schema_from_json(json: *const c_char, out: *mut *mut SqlcexSchema) -> SqlcexStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(SqlcexStatus::NullArgument, "out is null"));
        }
        *out = ptr::null_mut();
        let json = text(json, "json")?;
        let inner = load_schema(json).map_err(|e| fail(SqlcexStatus::Schema, e.to_string()))?;
        *out = Box::into_raw(Box::new(SqlcexSchema { inner }));
        Ok(())
    })
}

/// # Safety
/// `schema` must be NULL or a handle from `sqlcex_schema_from_json`.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_schema_free(schema: *mut SqlcexSchema) {
    if !schema.is_null() {
        drop(Box::from_raw(schema));
    }
}

fn task_config(c: &SqlcexConfig) -> TaskConfig {
    TaskConfig {
        max_bound: c.max_bound as usize,
        budget: SolveBudget::seconds(c.timeout_secs),
        exclude_degenerate: c.exclude_degenerate,
        validation_backend: if c.validation_backend == SqlcexBackend::Sqlite as u32 {
            ValidationBackend::Sqlite
        } else {
            ValidationBackend::Reference
        },
        ties: if c.arbitrary_ties {
            TieMode::Arbitrary
        } else {
            TieMode::InputOrder
        },
        ..TaskConfig::default()
    }
}

/// Checks `gold` against `gen` up to the configured bound. `config` may
/// be NULL for defaults. A query that does not parse yields
/// `SQLCEX_STATUS_PARSE`; one outside the supported subset yields an
/// inconclusive result.
///
/// # Safety
/// Pointers must be valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_check(
    schema: *const SqlcexSchema,
    gold: *const c_char,
    gen: *const c_char,
    config: *const SqlcexConfig,
    out: *mut *mut SqlcexResult,
) -> SqlcexStatus {
    guard(|| {
        if out.is_null() {
            return Err(fail(SqlcexStatus::NullArgument, "out is null"));
        }
        *out = ptr::null_mut();
        let Some(schema) = schema.as_ref() else {
            return Err(fail(SqlcexStatus::NullArgument, "schema is null"));
        };
        let gold = text(gold, "gold")?;
        let gen = text(gen, "gen")?;
        let cfg = match config.as_ref() {
            Some(c) => task_config(c),
            None => TaskConfig::default(),
        };
        let s = &schema.inner;
        let gold = Prepared::parse(gold, s).map_err(|e| fail(SqlcexStatus::Parse, format!("gold: {e}")))?;
        let gen = Prepared::parse(gen, s).map_err(|e| fail(SqlcexStatus::Parse, format!("gen: {e}")))?;
        let o = eqcheck(s, &gold, &gen, &cfg);
        *out = Box::into_raw(Box::new(SqlcexResult {
            schema: s.clone(),
            verdict: o.verdict,
            elapsed: o.elapsed.as_secs_f64(),
        }));
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a handle from `sqlcex_check`.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_free(r: *mut SqlcexResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_verdict(r: *const SqlcexResult) -> SqlcexVerdict {
    match r.as_ref().map(|r| &r.verdict) {
        Some(Verdict::EquivalentUpTo(_)) => SqlcexVerdict::EquivalentUpTo,
        Some(Verdict::NotEquivalent { .. }) => SqlcexVerdict::NotEquivalent,
        _ => SqlcexVerdict::Inconclusive,
    }
}

/// The bound checked up to, or the bound of the counterexample; 0 when
/// inconclusive.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_bound(r: *const SqlcexResult) -> u32 {
    match r.as_ref().map(|r| &r.verdict) {
        Some(Verdict::EquivalentUpTo(k)) => *k as u32,
        Some(Verdict::NotEquivalent { bound, .. }) => *bound as u32,
        _ => 0,
    }
}

/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_reason(r: *const SqlcexResult) -> SqlcexReason {
    match r.as_ref().map(|r| &r.verdict) {
        Some(Verdict::Inconclusive { reason, .. }) => match reason {
            InconclusiveReason::Timeout => SqlcexReason::Timeout,
            InconclusiveReason::Unsupported => SqlcexReason::Unsupported,
            InconclusiveReason::BoundOverflow => SqlcexReason::BoundOverflow,
            InconclusiveReason::SpuriousOnly => SqlcexReason::SpuriousOnly,
            InconclusiveReason::SolverError => SqlcexReason::SolverError,
        },
        _ => SqlcexReason::None,
    }
}

/// Explanation of an inconclusive result, or NULL.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_detail(r: *const SqlcexResult) -> *mut c_char {
    match r.as_ref().map(|r| &r.verdict) {
        Some(Verdict::Inconclusive { detail, .. }) => owned(detail.clone()),
        _ => ptr::null_mut(),
    }
}

/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_elapsed_secs(r: *const SqlcexResult) -> f64 {
    r.as_ref().map_or(0.0, |r| r.elapsed)
}

/// The counterexample as a JSON dump, or NULL when there is none.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_counterexample_json(r: *const SqlcexResult) -> *mut c_char {
    match r.as_ref() {
        Some(r) => r
            .verdict
            .counterexample()
            .map_or(ptr::null_mut(), |db| owned(db.to_dump_json(&r.schema))),
        None => ptr::null_mut(),
    }
}

/// The counterexample as INSERT statements, or NULL when there is none.
///
/// # Safety
/// `r` must be a valid result handle.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_result_counterexample_sql(r: *const SqlcexResult) -> *mut c_char {
    match r.as_ref() {
        Some(r) => r
            .verdict
            .counterexample()
            .map_or(ptr::null_mut(), |db| owned(db.insert_script())),
        None => ptr::null_mut(),
    }
}

/// Runs both queries on a dump (JSON or INSERT script) and stores EX
/// (1 when the row sets match) in `ex`.
///
/// # Safety
/// Pointers must be valid; `ex` writable.
#[no_mangle]
pub unsafe extern "C" fn sqlcex_replay(
    schema: *const SqlcexSchema,
    dump: *const c_char,
    gold: *const c_char,
    gen: *const c_char,
    ex: *mut c_int,
) -> SqlcexStatus {
    guard(|| {
        if ex.is_null() {
            return Err(fail(SqlcexStatus::NullArgument, "ex is null"));
        }
        let Some(schema) = schema.as_ref() else {
            return Err(fail(SqlcexStatus::NullArgument, "schema is null"));
        };
        let dump = text(dump, "dump")?;
        let gold = text(gold, "gold")?;
        let gen = text(gen, "gen")?;
        let r = harness::replay(&schema.inner, dump, gold, gen).map_err(|e| {
            let status = match e {
                harness::HarnessError::Parse(_) => SqlcexStatus::Parse,
                harness::HarnessError::Eval(_) => SqlcexStatus::Evaluation,
                _ => SqlcexStatus::Dump,
            };
            fail(status, e.to_string())
        })?;
        *ex = c_int::from(r.ex);
        Ok(())
    })
}
