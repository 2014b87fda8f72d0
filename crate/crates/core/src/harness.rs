//! Batch evaluation over a benchmark file: parse, check, cross-check,
//! score, and write reports and counterexample artifacts.
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! verdicts.jsonl
//! reports/report.txt, reports/report.json, reports/timing.txt
//! counterexamples/<question_id>/<method>/dump.json, insert.sql
//! counterexamples/<question_id>/<method>/adopted/<hash>.json, <hash>.sql
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::db::{ConcreteDb, DbError};
use crate::eval::{eval_query, ex_compare, Relation};
use crate::pipeline::score::{failure_counts, failure_histogram, score, MethodScore, QuestionOutcome};
use crate::pipeline::{cross_check, CrossEntry, InconclusiveReason, Prepared, TaskConfig, Verdict, VerdictCache};
use crate::schema::{load_schema, DatabaseSchema, SchemaError};
use crate::sql::{ParseError, SupportReport};
use crate::value::{rational_to_decimal, EvalError, Value};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {msg}")]
    Io { path: PathBuf, msg: String },
    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },
    #[error("schema {db_id}: {err}")]
    Schema { db_id: String, err: SchemaError },
    #[error("test database {db_id}: {err}")]
    TestDb { db_id: String, err: DbError },
    #[error(transparent)]
    Db(#[from] DbError),
    #[error("query: {0}")]
    Parse(#[from] ParseError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub question_id: String,
    pub db_id: String,
    #[serde(default)]
    pub question: String,
    pub gold_sql: String,
    #[serde(default)]
    pub predictions: BTreeMap<String, String>,
}

/// Reads a line-delimited dataset. Blank lines are skipped; question ids
/// must be unique.
pub fn load_dataset(path: &Path) -> Result<Vec<BenchmarkEntry>, HarnessError> {
    let text = read(path)?;
    let mut out: Vec<BenchmarkEntry> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let e: BenchmarkEntry = serde_json::from_str(line).map_err(|e| HarnessError::Dataset {
            line: i + 1,
            msg: e.to_string(),
        })?;
        if !seen.insert(e.question_id.clone()) {
            return Err(HarnessError::Dataset {
                line: i + 1,
                msg: format!("duplicate question_id `{}`", e.question_id),
            });
        }
        out.push(e);
    }
    Ok(out)
}

/// Loads `<dir>/<db_id>.json` for every db id the dataset uses.
pub fn load_schemas(dir: &Path, entries: &[BenchmarkEntry]) -> Result<BTreeMap<String, DatabaseSchema>, HarnessError> {
    let mut out = BTreeMap::new();
    for e in entries {
        if out.contains_key(&e.db_id) {
            continue;
        }
        let text = read(&dir.join(format!("{}.json", e.db_id)))?;
        let schema = load_schema(&text).map_err(|err| HarnessError::Schema {
            db_id: e.db_id.clone(),
            err,
        })?;
        out.insert(e.db_id.clone(), schema);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub task: TaskConfig,
    pub parallelism: usize,
    pub cross_check: bool,
    /// Verify only predictions that pass EX (all of them when there is no
    /// test database).
    pub verify_only_ex_passes: bool,
    /// Directory of `<db_id>.sql` INSERT scripts used for EX.
    pub test_dbs: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            task: TaskConfig::default(),
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cross_check: true,
            verify_only_ex_passes: true,
            test_dbs: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// One line of `verdicts.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub question_id: String,
    pub method: String,
    pub supported: bool,
    /// Why the pair is not supported, when it is not.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub unsupported: Option<String>,
    pub ex: Option<bool>,
    /// `equivalent_up_to`, `not_equivalent`, `inconclusive` or `skipped`.
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bound: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<InconclusiveReason>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
    pub seconds: f64,
    pub spurious: usize,
    /// Content hash of the validated counterexample.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub counterexample: Option<String>,
    /// Hashes of counterexamples adopted by cross-checking.
    #[serde(default)]
    pub adopted: Vec<String>,
}

impl VerdictRecord {
    pub fn is_inconclusive(&self) -> bool {
        self.verdict == "inconclusive"
    }

    pub fn has_counterexample(&self) -> bool {
        self.counterexample.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    #[serde(flatten)]
    pub score: MethodScore,
    pub pairs: usize,
    pub coverage: f64,
    pub counterexamples: usize,
    pub adopted: usize,
    pub inconclusive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub methods: Vec<MethodRow>,
    /// Per question: methods refuted by own counterexamples, and with
    /// cross-checked ones.
    pub failures: BTreeMap<String, (usize, usize)>,
    /// Questions per number of refuted methods.
    pub histogram: BTreeMap<usize, usize>,
}

pub struct EvalRun {
    pub report: EvalReport,
    pub records: Vec<VerdictRecord>,
    /// 0 when every pair got a verdict, 1 when some were inconclusive.
    pub exit_code: i32,
}

struct Cell<'a> {
    entry: &'a BenchmarkEntry,
    method: String,
    schema: &'a DatabaseSchema,
    gold: Result<Prepared, String>,
    gen: Result<Prepared, String>,
    support: Result<(), String>,
    ex: Option<bool>,
}

fn prepare(sql: &str, schema: &DatabaseSchema) -> Result<Prepared, String> {
    Prepared::parse(sql, schema).map_err(|e| e.to_string())
}

fn support_of(gold: &Result<Prepared, String>, gen: &Result<Prepared, String>) -> Result<(), String> {
    let mut why = Vec::new();
    for (side, p) in [("gold", gold), ("generated", gen)] {
        match p {
            Err(e) => why.push(format!("{side}: {e}")),
            Ok(p) => {
                if let SupportReport::Unsupported(f) = p.support() {
                    why.push(format!("{side}: {}", f.join(", ")));
                }
            }
        }
    }
    if why.is_empty() {
        Ok(())
    } else {
        Err(why.join("; "))
    }
}

fn load_test_db(dir: &Path, db_id: &str, schema: &DatabaseSchema) -> Result<Option<ConcreteDb>, HarnessError> {
    let path = dir.join(format!("{db_id}.sql"));
    if !path.is_file() {
        return Ok(None);
    }
    let text = read(&path)?;
    ConcreteDb::from_insert_script(&text, schema)
        .map(Some)
        .map_err(|err| HarnessError::TestDb {
            db_id: db_id.to_string(),
            err,
        })
}

fn check_cell(cell: &Cell<'_>, cfg: &EvalConfig, cache: &VerdictCache) -> (Option<crate::pipeline::CheckOutcome>, VerdictRecord) {
    let mut rec = VerdictRecord {
        question_id: cell.entry.question_id.clone(),
        method: cell.method.clone(),
        supported: cell.support.is_ok(),
        unsupported: cell.support.clone().err(),
        ex: cell.ex,
        verdict: "skipped".into(),
        bound: None,
        reason: None,
        detail: None,
        seconds: 0.0,
        spurious: 0,
        counterexample: None,
        adopted: Vec::new(),
    };
    if cfg.verify_only_ex_passes && cell.ex == Some(false) {
        return (None, rec);
    }
    let (Ok(gold), Ok(gen), Ok(())) = (&cell.gold, &cell.gen, &cell.support) else {
        rec.verdict = "inconclusive".into();
        rec.reason = Some(InconclusiveReason::Unsupported);
        rec.detail = rec.unsupported.clone();
        return (None, rec);
    };
    let run = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        cache.get_or_check(cell.schema, gold, gen, &cfg.task)
    }));
    let out = match run {
        Ok(o) => o,
        Err(_) => {
            rec.verdict = "inconclusive".into();
            rec.reason = Some(InconclusiveReason::SolverError);
            rec.detail = Some("verification panicked".into());
            return (None, rec);
        }
    };
    rec.verdict = out.verdict.kind().into();
    rec.seconds = out.elapsed.as_secs_f64();
    rec.spurious = out.spurious.len();
    match &out.verdict {
        Verdict::EquivalentUpTo(k) => rec.bound = Some(*k),
        Verdict::NotEquivalent { db, bound, .. } => {
            rec.bound = Some(*bound);
            rec.counterexample = Some(db.content_hash(cell.schema));
        }
        Verdict::Inconclusive { reason, detail } => {
            rec.reason = Some(*reason);
            rec.detail = Some(detail.clone());
        }
    }
    (Some(out), rec)
}

/// Runs the whole evaluation and writes every artifact under
/// `cfg.out_dir`. Errors are ingest or I/O failures; per-pair problems
/// become inconclusive verdicts.
pub fn run_eval(dataset: &Path, schemas_dir: &Path, cfg: &EvalConfig) -> Result<EvalRun, HarnessError> {
    let entries = load_dataset(dataset)?;
    let schemas = load_schemas(schemas_dir, &entries)?;
    let mut test_dbs: BTreeMap<String, Option<ConcreteDb>> = BTreeMap::new();
    if let Some(dir) = &cfg.test_dbs {
        for (id, s) in &schemas {
            test_dbs.insert(id.clone(), load_test_db(dir, id, s)?);
        }
    }
    let mut cells = Vec::new();
    for e in &entries {
        let schema = &schemas[&e.db_id];
        for (method, sql) in &e.predictions {
            let gold = prepare(&e.gold_sql, schema);
            let gen = prepare(sql, schema);
            let support = support_of(&gold, &gen);
            let ex = match (test_dbs.get(&e.db_id).and_then(Option::as_ref), &gold, &gen) {
                (Some(db), Ok(g), Ok(p)) => Some(ex_compare(&g.query, &p.query, db).unwrap_or(false)),
                (Some(_), _, _) => Some(false),
                (None, _, _) => None,
            };
            cells.push(Cell {
                entry: e,
                method: method.clone(),
                schema,
                gold,
                gen,
                support,
                ex,
            });
        }
    }
    let cache = VerdictCache::default();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism.max(1))
        .build()
        .map_err(|e| HarnessError::Io {
            path: PathBuf::from("<thread pool>"),
            msg: e.to_string(),
        })?;
    let results: Vec<_> = pool.install(|| cells.par_iter().map(|c| check_cell(c, cfg, &cache)).collect());
    let (outcomes, mut records): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let mut cross: Vec<CrossEntry<'_>> = cells
        .iter()
        .zip(&outcomes)
        .filter_map(|(c, o)| {
            let gold = c.gold.as_ref().ok()?;
            Some(CrossEntry {
                question_id: c.entry.question_id.clone(),
                method: c.method.clone(),
                schema: c.schema,
                gold: &gold.query,
                gen: c.gen.as_ref().ok().map(|p| &p.query),
                found: o
                    .as_ref()
                    .and_then(|o| o.verdict.counterexample().cloned())
                    .into_iter()
                    .collect(),
                adopted: Vec::new(),
            })
        })
        .collect();
    if cfg.cross_check {
        cross_check(&mut cross);
    }
    let mut adopted: BTreeMap<(String, String), Vec<ConcreteDb>> = BTreeMap::new();
    for e in cross {
        adopted.insert((e.question_id, e.method), e.adopted);
    }

    let out = &cfg.out_dir;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut question_outcomes = Vec::new();
    for ((cell, outcome), rec) in cells.iter().zip(&outcomes).zip(records.iter_mut()) {
        let key = (rec.question_id.clone(), rec.method.clone());
        let skipped = rec.verdict == "skipped";
        let adopted_here: &[ConcreteDb] = if skipped {
            &[]
        } else {
            adopted.get(&key).map_or(&[], Vec::as_slice)
        };
        let dir = out.join("counterexamples").join(&rec.question_id).join(&rec.method);
        if let Some(db) = outcome.as_ref().and_then(|o| o.verdict.counterexample()) {
            write(&dir.join("dump.json"), &db.to_dump_json(cell.schema))?;
            write(&dir.join("insert.sql"), &db.insert_script())?;
        }
        for db in adopted_here {
            let h = db.content_hash(cell.schema);
            let short = &h[..16];
            write(&dir.join("adopted").join(format!("{short}.json")), &db.to_dump_json(cell.schema))?;
            write(&dir.join("adopted").join(format!("{short}.sql")), &db.insert_script())?;
            rec.adopted.push(h);
        }
        question_outcomes.push(QuestionOutcome {
            question_id: rec.question_id.clone(),
            method: rec.method.clone(),
            ex: rec.ex,
            own_counterexample: rec.has_counterexample(),
            cross_counterexample: !rec.adopted.is_empty(),
        });
    }

    let report = build_report(&records, &question_outcomes);
    let mut lines = String::new();
    for r in &records {
        lines.push_str(&serde_json::to_string(r).expect("record serializes"));
        lines.push('\n');
    }
    write(&out.join("verdicts.jsonl"), &lines)?;
    write(&out.join("reports").join("report.txt"), &format_report(&report))?;
    write(
        &out.join("reports").join("report.json"),
        &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
    )?;
    write(&out.join("reports").join("timing.txt"), &format_stats(&stats(&records)))?;
    let exit_code = if records.iter().any(VerdictRecord::is_inconclusive) { 1 } else { 0 };
    Ok(EvalRun {
        report,
        records,
        exit_code,
    })
}

fn build_report(records: &[VerdictRecord], outcomes: &[QuestionOutcome]) -> EvalReport {
    let scores = score(outcomes);
    let methods = scores
        .into_iter()
        .map(|s| {
            let mine: Vec<&VerdictRecord> = records.iter().filter(|r| r.method == s.method).collect();
            let pairs = mine.len();
            let supported = mine.iter().filter(|r| r.supported).count();
            MethodRow {
                pairs,
                coverage: if pairs == 0 { 0.0 } else { 100.0 * supported as f64 / pairs as f64 },
                counterexamples: mine.iter().filter(|r| r.has_counterexample()).count(),
                adopted: mine.iter().filter(|r| !r.adopted.is_empty()).count(),
                inconclusive: mine.iter().filter(|r| r.is_inconclusive()).count(),
                score: s,
            }
        })
        .collect();
    EvalReport {
        methods,
        failures: failure_counts(outcomes),
        histogram: failure_histogram(outcomes),
    }
}

pub fn format_report(r: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>6} {:>8} {:>4} {:>8} {:>4} {:>8} {:>4} {:>8} {:>5} {:>5} {:>6}",
        "method", "pairs", "EX", "rk", "verify", "rk", "+cross", "rk", "cover%", "cex", "adopt", "incon"
    );
    for m in &r.methods {
        let sc = &m.score;
        let _ = writeln!(
            s,
            "{:<20} {:>6} {:>8.2} {:>4} {:>8.2} {:>4} {:>8.2} {:>4} {:>8.2} {:>5} {:>5} {:>6}",
            sc.method,
            m.pairs,
            sc.ex_accuracy,
            sc.ex_rank,
            sc.verify_accuracy,
            sc.verify_rank,
            sc.verify_cc_accuracy,
            sc.verify_cc_rank,
            m.coverage,
            m.counterexamples,
            m.adopted,
            m.inconclusive
        );
    }
    if !r.histogram.is_empty() {
        let _ = writeln!(s, "\nquestions by number of refuted methods:");
        for (n, q) in &r.histogram {
            let _ = writeln!(s, "  {n:>3} methods: {q} questions");
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub method: String,
    pub pairs: usize,
    pub supported_percent: f64,
    pub counterexample_percent: f64,
    pub mean_seconds: Option<f64>,
    pub median_seconds: Option<f64>,
}

/// Coverage and time-to-counterexample per method.
pub fn stats(records: &[VerdictRecord]) -> Vec<StatsRow> {
    let mut by: BTreeMap<&str, Vec<&VerdictRecord>> = BTreeMap::new();
    for r in records {
        by.entry(&r.method).or_default().push(r);
    }
    by.into_iter()
        .map(|(m, rs)| {
            let n = rs.len();
            let pct = |k: usize| if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 };
            let mut times: Vec<f64> = rs.iter().filter(|r| r.has_counterexample()).map(|r| r.seconds).collect();
            times.sort_by(f64::total_cmp);
            let mean = (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64);
            let median = (!times.is_empty()).then(|| {
                let mid = times.len() / 2;
                if times.len() % 2 == 1 {
                    times[mid]
                } else {
                    (times[mid - 1] + times[mid]) / 2.0
                }
            });
            StatsRow {
                method: m.to_string(),
                pairs: n,
                supported_percent: pct(rs.iter().filter(|r| r.supported).count()),
                counterexample_percent: pct(times.len()),
                mean_seconds: mean,
                median_seconds: median,
            }
        })
        .collect()
}

pub fn format_stats(rows: &[StatsRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<20} {:>6} {:>10} {:>8} {:>9} {:>9}",
        "method", "pairs", "supported%", "cex%", "mean s", "median s"
    );
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{:<20} {:>6} {:>10.2} {:>8.2} {:>9} {:>9}",
            r.method,
            r.pairs,
            r.supported_percent,
            r.counterexample_percent,
            opt(r.mean_seconds),
            opt(r.median_seconds)
        );
    }
    s
}

/// Reads a `verdicts.jsonl` stream.
pub fn load_records(path: &Path) -> Result<Vec<VerdictRecord>, HarnessError> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| HarnessError::Dataset {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub gold: Relation,
    pub gen: Relation,
    /// 1 when the row sets match.
    pub ex: u8,
}

/// Evaluates both queries on a dumped database.
pub fn replay(schema: &DatabaseSchema, dump: &str, gold_sql: &str, gen_sql: &str) -> Result<ReplayResult, HarnessError> {
    let db = if dump.trim_start().starts_with('{') {
        ConcreteDb::from_dump_json(dump, schema)?
    } else {
        ConcreteDb::from_insert_script(dump, schema)?
    };
    let gold = crate::sql::parse_sql(gold_sql, schema)?;
    let gen = crate::sql::parse_sql(gen_sql, schema)?;
    let g = eval_query(&db, &gold)?;
    let p = eval_query(&db, &gen)?;
    let ex = u8::from(crate::eval::same_row_set(&g, &p));
    Ok(ReplayResult { gold: g, gen: p, ex })
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => rational_to_decimal(r),
        Value::Str(s) => s.clone(),
        Value::Date(d) => crate::value::date_to_str(*d),
    }
}

pub fn format_relation(r: &Relation) -> String {
    let mut s = String::new();
    if r.rows.is_empty() {
        s.push_str("(no rows)\n");
    }
    for row in &r.rows {
        let cells: Vec<String> = row.iter().map(cell_text).collect();
        s.push_str(&cells.join(" | "));
        s.push('\n');
    }
    s
}
