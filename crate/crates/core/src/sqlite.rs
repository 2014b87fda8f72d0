//! Runs queries in an external SQLite command-line process.
//!
//! The executable comes from `SQLCEX_SQLITE`, else `sqlite3` on the PATH.
//! The database is rebuilt in memory from the schema's `CREATE` script and
//! the database's `INSERT` script, then each query runs in `.mode quote`
//! followed by a marker line.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;
use wait_timeout::ChildExt;

use crate::db::ConcreteDb;
use crate::eval::Relation;
use crate::schema::DatabaseSchema;
use crate::value::Value;

pub const SQLITE_ENV: &str = "SQLCEX_SQLITE";
const MARKER: &str = "<<sqlcex-end>>";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SqliteError {
    #[error("no SQLite executable found")]
    Unavailable,
    #[error("SQLite process failed: {0}")]
    Process(String),
    #[error("SQLite rejected query {index}: {msg}")]
    Query { index: usize, msg: String },
    #[error("unreadable SQLite output: {0}")]
    Output(String),
}

pub fn sqlite_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os(SQLITE_ENV) {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    crate::solver::find_on_path("sqlite3")
}

pub fn sqlite_available() -> bool {
    sqlite_path().is_some()
}

/// The script fed to the process for `db` and `queries`.
pub fn replay_script(schema: &DatabaseSchema, db: &ConcreteDb, queries: &[&str]) -> String {
    let mut s = String::new();
    s.push_str("PRAGMA case_sensitive_like = ON;\n");
    s.push_str(&schema.create_script());
    s.push_str(&db.insert_script());
    s.push_str(".mode quote\n");
    for q in queries {
        s.push_str(q.trim().trim_end_matches(';'));
        s.push_str(";\n");
        s.push_str(&format!("SELECT '{MARKER}';\n"));
    }
    s
}

/// Executes every query against `db` and returns their results in order.
pub fn run_queries(schema: &DatabaseSchema, db: &ConcreteDb, queries: &[&str]) -> Result<Vec<Relation>, SqliteError> {
    let bin = sqlite_path().ok_or(SqliteError::Unavailable)?;
    let script = replay_script(schema, db, queries);
    let mut child = Command::new(&bin)
        .arg("-bail")
        .arg(":memory:")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| SqliteError::Process(format!("cannot start {}: {e}", bin.display())))?;
    {
        let mut stdin = child.stdin.take().expect("piped stdin");
        stdin
            .write_all(script.as_bytes())
            .map_err(|e| SqliteError::Process(e.to_string()))?;
    }
    match child.wait_timeout(Duration::from_secs(60)) {
        Ok(Some(_)) => {}
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(SqliteError::Process("timed out".into()));
        }
        Err(e) => return Err(SqliteError::Process(e.to_string())),
    }
    let out = child.wait_with_output().map_err(|e| SqliteError::Process(e.to_string()))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let stderr = String::from_utf8_lossy(&out.stderr);
    parse_output(&stdout, queries.len()).map_err(|e| match e {
        SqliteError::Query { index, .. } => SqliteError::Query {
            index,
            msg: stderr.trim().to_string(),
        },
        other => other,
    })
}

fn parse_output(stdout: &str, expected: usize) -> Result<Vec<Relation>, SqliteError> {
    let marker_line = format!("'{MARKER}'");
    let mut results = Vec::with_capacity(expected);
    let mut rows: Vec<Vec<Value>> = Vec::new();
    for line in stdout.lines() {
        if line.trim_end() == marker_line {
            let arity = rows.first().map_or(0, Vec::len);
            results.push(Relation {
                arity,
                rows: std::mem::take(&mut rows),
            });
            continue;
        }
        rows.push(parse_row(line)?);
    }
    if results.len() < expected {
        return Err(SqliteError::Query {
            index: results.len(),
            msg: String::new(),
        });
    }
    Ok(results)
}

/// Reads one `.mode quote` output line: comma-separated SQL literals.
fn parse_row(line: &str) -> Result<Vec<Value>, SqliteError> {
    let bad = || SqliteError::Output(line.to_string());
    let c: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    loop {
        if i < c.len() && c[i] == '\'' {
            let mut s = String::new();
            i += 1;
            loop {
                match c.get(i) {
                    None => return Err(bad()),
                    Some('\'') if c.get(i + 1) == Some(&'\'') => {
                        s.push('\'');
                        i += 2;
                    }
                    Some('\'') => {
                        i += 1;
                        break;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            out.push(Value::Str(s));
        } else {
            let start = i;
            while i < c.len() && c[i] != ',' {
                i += 1;
            }
            let tok: String = c[start..i].iter().collect();
            out.push(parse_scalar(tok.trim()).ok_or_else(bad)?);
        }
        match c.get(i) {
            None => break,
            Some(',') => i += 1,
            Some(_) => return Err(bad()),
        }
    }
    Ok(out)
}

fn parse_scalar(tok: &str) -> Option<Value> {
    if tok == "NULL" {
        return Some(Value::Null);
    }
    if let Ok(i) = tok.parse::<i64>() {
        return Some(Value::Int(i));
    }
    decimal_to_rational(tok).map(Value::Real)
}

/// Exact value of a decimal literal such as `-1.25e-3`.
pub fn decimal_to_rational(tok: &str) -> Option<BigRational> {
    let (mant, exp) = match tok.find(['e', 'E']) {
        Some(p) => (&tok[..p], tok[p + 1..].parse::<i32>().ok()?),
        None => (tok, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|ch| ch.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(digits);
    let factor = BigRational::from_integer(num_traits::pow(ten, scale.unsigned_abs() as usize));
    if scale >= 0 {
        r *= factor;
    } else {
        r /= factor;
    }
    if neg {
        r = -r;
    }
    Some(r)
}
