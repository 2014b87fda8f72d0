use std::ffi::{c_char, c_int, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use sqlcex_ffi::*;

const SCHEMA: &str = r#"{"tables": [{"name": "R", "columns": [{"name": "id", "type": "int"}, {"name": "dob", "type": "date"}]}]}"#;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(p: *mut c_char) -> Option<String> {
    if p.is_null() {
        return None;
    }
    let s = CStr::from_ptr(p).to_str().unwrap().to_string();
    sqlcex_string_free(p);
    Some(s)
}

unsafe fn schema() -> *mut SqlcexSchema {
    let mut s = ptr::null_mut();
    assert_eq!(sqlcex_schema_from_json(c(SCHEMA).as_ptr(), &mut s), SqlcexStatus::Ok);
    assert!(!s.is_null());
    s
}

fn z3() -> bool {
    sqlcex::solver::solver_available()
}

#[test]
fn bad_schema_and_nulls_report_errors() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(sqlcex_schema_from_json(c("{").as_ptr(), &mut s), SqlcexStatus::Schema);
        assert!(s.is_null());
        assert!(take(sqlcex_last_error()).is_some());
        assert_eq!(sqlcex_schema_from_json(ptr::null(), &mut s), SqlcexStatus::NullArgument);
        let sc = schema();
        let mut r = ptr::null_mut();
        let q = c("SELECT id FROM R");
        assert_eq!(
            sqlcex_check(sc, q.as_ptr(), ptr::null(), ptr::null(), &mut r),
            SqlcexStatus::NullArgument
        );
        assert_eq!(
            sqlcex_check(sc, c("SELECT nope FROM R").as_ptr(), q.as_ptr(), ptr::null(), &mut r),
            SqlcexStatus::Parse
        );
        assert!(take(sqlcex_last_error()).unwrap().contains("gold"));
        let bad = [0xffu8, 0];
        assert_eq!(
            sqlcex_check(sc, bad.as_ptr().cast(), q.as_ptr(), ptr::null(), &mut r),
            SqlcexStatus::InvalidUtf8
        );
        sqlcex_schema_free(sc);
        sqlcex_schema_free(ptr::null_mut());
        sqlcex_result_free(ptr::null_mut());
        sqlcex_string_free(ptr::null_mut());
    }
}

#[test]
fn check_and_replay_round_trip() {
    if !z3() {
        eprintln!("z3 not found; skipping");
        return;
    }
    unsafe {
        let sc = schema();
        let mut cfg = std::mem::zeroed::<SqlcexConfig>();
        sqlcex_config_default(&mut cfg);
        assert_eq!(cfg.max_bound, 5);
        cfg.timeout_secs = 30.0;
        let (g, p) = (c("SELECT id FROM R WHERE id > 1"), c("SELECT id FROM R WHERE id > 2"));
        let mut r = ptr::null_mut();
        assert_eq!(sqlcex_check(sc, g.as_ptr(), p.as_ptr(), &cfg, &mut r), SqlcexStatus::Ok);
        assert_eq!(sqlcex_result_verdict(r), SqlcexVerdict::NotEquivalent);
        assert_eq!(sqlcex_result_bound(r), 1);
        assert_eq!(sqlcex_result_reason(r), SqlcexReason::None);
        assert!(take(sqlcex_result_detail(r)).is_none());
        assert!(sqlcex_result_elapsed_secs(r) >= 0.0);
        let dump = take(sqlcex_result_counterexample_json(r)).unwrap();
        let sql = take(sqlcex_result_counterexample_sql(r)).unwrap();
        assert!(sql.starts_with("INSERT INTO \"R\" VALUES (2, "), "{sql}");
        for text in [dump, sql] {
            let mut ex: c_int = -1;
            assert_eq!(sqlcex_replay(sc, c(&text).as_ptr(), g.as_ptr(), p.as_ptr(), &mut ex), SqlcexStatus::Ok);
            assert_eq!(ex, 0);
            assert_eq!(sqlcex_replay(sc, c(&text).as_ptr(), g.as_ptr(), g.as_ptr(), &mut ex), SqlcexStatus::Ok);
            assert_eq!(ex, 1);
        }
        sqlcex_result_free(r);

        let mut r = ptr::null_mut();
        assert_eq!(sqlcex_check(sc, g.as_ptr(), g.as_ptr(), &cfg, &mut r), SqlcexStatus::Ok);
        assert_eq!(sqlcex_result_verdict(r), SqlcexVerdict::EquivalentUpTo);
        assert_eq!(sqlcex_result_bound(r), 5);
        assert!(take(sqlcex_result_counterexample_json(r)).is_none());
        sqlcex_result_free(r);
        sqlcex_schema_free(sc);
    }
}

#[test]
fn replay_rejects_dump_missing_a_table() {
    unsafe {
        let sc = schema();
        let q = c("SELECT id FROM R");
        let mut ex: c_int = -1;
        let st = sqlcex_replay(sc, c(r#"{"tables": []}"#).as_ptr(), q.as_ptr(), q.as_ptr(), &mut ex);
        assert_eq!(st, SqlcexStatus::Dump);
        assert!(take(sqlcex_last_error()).unwrap().contains("`R`"));
        sqlcex_schema_free(sc);
    }
}

#[test]
fn version_is_static() {
    let v = unsafe { CStr::from_ptr(sqlcex_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn header_declares_the_interface() {
    let h = std::fs::read_to_string(manifest().join("include/sqlcex.h")).unwrap();
    for name in [
        "sqlcex_schema_from_json",
        "sqlcex_check",
        "sqlcex_replay",
        "sqlcex_result_counterexample_sql",
        "sqlcex_last_error",
        "typedef struct SqlcexSchema SqlcexSchema;",
        "SQLCEX_STATUS_PARSE = 4",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
}

/// Compiles and runs a C program against the shared library.
#[test]
fn c_program_links_and_runs() {
    if Command::new("cc").arg("--version").output().is_err() || !z3() {
        eprintln!("no C compiler or z3; skipping");
        return;
    }
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    if !lib_dir.join("libsqlcex_ffi.so").is_file() {
        eprintln!("shared library not built at {}; skipping", lib_dir.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("check");
    let st = Command::new("cc")
        .arg(manifest().join("tests/c/check.c"))
        .arg("-I")
        .arg(manifest().join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lsqlcex_ffi")
        .arg("-o")
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let run = Command::new(&bin).env("LD_LIBRARY_PATH", &lib_dir).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "exit {:?}: {stdout}", run.status.code());
    assert!(stdout.contains("ok "), "{stdout}");
}
