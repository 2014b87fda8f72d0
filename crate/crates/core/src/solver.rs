//! Satisfiability checks through an external z3 process speaking SMT-LIB2.
//!
//! The binary comes from `SQLCEX_Z3`, else `z3` on the PATH. A missing or
//! crashing solver yields `Unknown`, never a verdict.

use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use crate::smt::smtlib::{parse_sexps, parse_values};
use crate::smt::{Assignment, Store};

pub const SOLVER_ENV: &str = "SQLCEX_Z3";

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolveBudget {
    pub cpu_seconds: f64,
    pub memory_bytes: u64,
}

impl Default for SolveBudget {
    fn default() -> Self {
        SolveBudget {
            cpu_seconds: 600.0,
            memory_bytes: 4 << 30,
        }
    }
}

impl SolveBudget {
    pub fn seconds(cpu_seconds: f64) -> SolveBudget {
        SolveBudget {
            cpu_seconds,
            ..SolveBudget::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveResult {
    Sat(Assignment),
    Unsat,
    Timeout,
    Unknown(String),
}

/// Path of the solver binary, if one can be found.
pub fn solver_path() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os(SOLVER_ENV) {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    find_on_path("z3")
}

pub(crate) fn find_on_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join(name))
        .find(|p| p.is_file())
}

pub fn solver_available() -> bool {
    solver_path().is_some()
}

/// Runs `script` (which must end in `check-sat` and a `get-value` over the
/// variables of interest) and reads back the model.
pub fn solve_script(store: &Store, script: &str, budget: SolveBudget) -> SolveResult {
    let Some(bin) = solver_path() else {
        return SolveResult::Unknown("no z3 binary found".into());
    };
    if !(budget.cpu_seconds > 0.0) {
        return SolveResult::Timeout;
    }
    let secs = budget.cpu_seconds.ceil().max(1.0) as u64;
    let mb = (budget.memory_bytes >> 20).max(16);
    let mut child = match Command::new(&bin)
        .arg("-in")
        .arg("-smt2")
        .arg(format!("-T:{secs}"))
        .arg(format!("-memory:{mb}"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => return SolveResult::Unknown(format!("cannot start {}: {e}", bin.display())),
    };
    let mut stdin = child.stdin.take().expect("piped stdin");
    let text = script.to_string();
    let writer = std::thread::spawn(move || {
        // a write error means the solver already exited; its status tells why
        let _ = stdin.write_all(text.as_bytes());
        let _ = stdin.write_all(b"(exit)\n");
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let reader = std::thread::spawn(move || {
        let mut out = String::new();
        let _ = stdout.read_to_string(&mut out);
        out
    });
    let start = Instant::now();
    let wall = Duration::from_secs_f64(budget.cpu_seconds) + Duration::from_secs(2);
    let status = match child.wait_timeout(wall) {
        Ok(Some(s)) => Some(s),
        Ok(None) => {
            let _ = child.kill();
            let _ = child.wait();
            None
        }
        Err(e) => return SolveResult::Unknown(format!("waiting for solver: {e}")),
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    if status.is_none() {
        log::debug!("solver killed after {:?}", start.elapsed());
        return SolveResult::Timeout;
    }
    interpret(store, &out)
}

fn interpret(store: &Store, out: &str) -> SolveResult {
    let trimmed = out.trim_start();
    let (head, rest) = trimmed.split_once('\n').unwrap_or((trimmed, ""));
    match head.trim() {
        "unsat" => SolveResult::Unsat,
        "timeout" => SolveResult::Timeout,
        "unknown" => {
            if rest.contains("timeout") || rest.contains("canceled") {
                SolveResult::Timeout
            } else {
                SolveResult::Unknown(format!("solver answered unknown {}", rest.trim()))
            }
        }
        "sat" => {
            let sexps = match parse_sexps(rest) {
                Ok(s) => s,
                Err(e) => return SolveResult::Unknown(format!("unreadable model: {}", e.0)),
            };
            let Some(reply) = sexps.first() else {
                return SolveResult::Sat(Assignment::new());
            };
            match parse_values(store, reply) {
                Ok(v) => SolveResult::Sat(v),
                Err(e) => SolveResult::Unknown(format!("unreadable model: {}", e.0)),
            }
        }
        other => {
            let msg: String = format!("{other} {rest}").chars().take(300).collect();
            if msg.contains("timeout") {
                SolveResult::Timeout
            } else {
                SolveResult::Unknown(format!("unexpected solver output: {}", msg.trim()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smt::{smtlib, Lit, Sort};

    #[test]
    fn reads_sat_unsat_and_garbage() {
        let mut st = Store::new();
        let x = st.var("x", Sort::Int);
        match interpret(&st, "sat\n((x 3))\n") {
            SolveResult::Sat(m) => assert_eq!(m[&x], Lit::Int(3.into())),
            other => panic!("{other:?}"),
        }
        assert_eq!(interpret(&st, "unsat\n(error \"model not available\")"), SolveResult::Unsat);
        assert_eq!(interpret(&st, "timeout\n"), SolveResult::Timeout);
        assert!(matches!(interpret(&st, "(error \"boom\")"), SolveResult::Unknown(_)));
    }

    #[test]
    fn solves_small_formula() {
        if !solver_available() {
            eprintln!("z3 not found; skipping");
            return;
        }
        let mut st = Store::new();
        let x = st.var("x", Sort::Int);
        let s = st.var("s", Sort::Str);
        let one = st.int(1);
        let two = st.int(2);
        let a = st.lt(one, x);
        let b = st.le(x, two);
        let len = st.str_len(s);
        let c = st.eq(len, x);
        let script = smtlib::script(&st, &[a, b, c], &[x, s]);
        match solve_script(&st, &script, SolveBudget::seconds(10.0)) {
            SolveResult::Sat(m) => {
                assert_eq!(m[&x], Lit::Int(2.into()));
                assert_eq!(m[&s].as_str().chars().count(), 2);
            }
            other => panic!("{other:?}"),
        }
        let d = st.lt(x, one);
        let script = smtlib::script(&st, &[a, d], &[x]);
        assert_eq!(solve_script(&st, &script, SolveBudget::seconds(10.0)), SolveResult::Unsat);
    }
}
