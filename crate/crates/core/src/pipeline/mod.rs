//! Bounded equivalence checking with counterexample validation, and
//! cross-checking of counterexamples between methods.

pub mod score;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::db::ConcreteDb;
use crate::encode::{decode_database, nonequivalence_formula, EncodeError, EncodeOptions, TieMode};
use crate::eval::{ex_compare, same_row_set};
use crate::oracle::DomainSpec;
use crate::schema::DatabaseSchema;
use crate::solver::{solve_script, SolveBudget, SolveResult};
use crate::sql::printer::query_to_sql;
use crate::sql::{feature_scan, parse_sql, ParseError, Query, SupportReport};
use crate::sqlite;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationBackend {
    #[default]
    Reference,
    Sqlite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskConfig {
    pub max_bound: usize,
    /// Solver budget for a whole pair, shared by all bounds.
    pub budget: SolveBudget,
    pub exclude_degenerate: bool,
    pub validation_backend: ValidationBackend,
    pub ties: TieMode,
    pub ceiling: usize,
    /// Blocking-clause retries per bound after a spurious model.
    pub retries: usize,
    /// Directory receiving one SMT-LIB file per solver call.
    pub emit_smtlib: Option<PathBuf>,
    /// Restricts cells to finite pools, for comparison with the oracle.
    pub pools: Option<DomainSpec>,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig {
            max_bound: 5,
            budget: SolveBudget::default(),
            exclude_degenerate: true,
            validation_backend: ValidationBackend::Reference,
            ties: TieMode::InputOrder,
            ceiling: 64,
            retries: 3,
            emit_smtlib: None,
            pools: None,
        }
    }
}

impl TaskConfig {
    pub fn encode_options(&self) -> EncodeOptions {
        EncodeOptions {
            ceiling: self.ceiling,
            ties: self.ties,
            exclude_degenerate: self.exclude_degenerate,
            pools: self.pools.clone(),
            ..EncodeOptions::default()
        }
    }

    /// The settings that can change a verdict, as cache-key text.
    fn fingerprint(&self) -> String {
        format!(
            "K={} t={} m={} deg={} val={:?} ties={:?} ceil={} retries={} pools={:?}",
            self.max_bound,
            self.budget.cpu_seconds,
            self.budget.memory_bytes,
            self.exclude_degenerate,
            self.validation_backend,
            self.ties,
            self.ceiling,
            self.retries,
            self.pools
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InconclusiveReason {
    Timeout,
    Unsupported,
    BoundOverflow,
    SpuriousOnly,
    SolverError,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    EquivalentUpTo(usize),
    NotEquivalent {
        db: ConcreteDb,
        bound: usize,
        validated: bool,
    },
    Inconclusive {
        reason: InconclusiveReason,
        detail: String,
    },
}

impl Verdict {
    pub fn inconclusive(reason: InconclusiveReason, detail: impl Into<String>) -> Verdict {
        Verdict::Inconclusive {
            reason,
            detail: detail.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Verdict::EquivalentUpTo(_) => "equivalent_up_to",
            Verdict::NotEquivalent { .. } => "not_equivalent",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }

    /// The validated counterexample, if any.
    pub fn counterexample(&self) -> Option<&ConcreteDb> {
        match self {
            Verdict::NotEquivalent { db, validated: true, .. } => Some(db),
            _ => None,
        }
    }
}

/// A query with the text it was parsed from, which the external backend
/// runs verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub sql: String,
    pub query: Query,
}

impl Prepared {
    pub fn parse(sql: &str, schema: &DatabaseSchema) -> Result<Prepared, ParseError> {
        Ok(Prepared {
            sql: sql.to_string(),
            query: parse_sql(sql, schema)?,
        })
    }

    pub fn support(&self) -> SupportReport {
        feature_scan(&self.query)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundCheck {
    Equivalent,
    NotEquivalent(ConcreteDb),
    Inconclusive(InconclusiveReason, String),
}

fn encode_failure(e: EncodeError) -> BoundCheck {
    let reason = match e {
        EncodeError::BoundOverflow { .. } => InconclusiveReason::BoundOverflow,
        _ => InconclusiveReason::Unsupported,
    };
    BoundCheck::Inconclusive(reason, e.to_string())
}

/// One bound: encode, solve, decode. Models equal to a `blocked` database
/// are excluded.
pub fn check_bounded(
    schema: &DatabaseSchema,
    q1: &Query,
    q2: &Query,
    k: usize,
    budget: SolveBudget,
    opts: &EncodeOptions,
) -> BoundCheck {
    check_bounded_blocking(schema, q1, q2, k, budget, opts, &[], None)
}

#[allow(clippy::too_many_arguments)]
pub fn check_bounded_blocking(
    schema: &DatabaseSchema,
    q1: &Query,
    q2: &Query,
    k: usize,
    budget: SolveBudget,
    opts: &EncodeOptions,
    blocked: &[ConcreteDb],
    emit: Option<&std::path::Path>,
) -> BoundCheck {
    for q in [q1, q2] {
        if let SupportReport::Unsupported(f) = feature_scan(q) {
            return BoundCheck::Inconclusive(InconclusiveReason::Unsupported, f.join(", "));
        }
    }
    let mut formula = match nonequivalence_formula(schema, q1, q2, k, opts) {
        Ok(f) => f,
        Err(e) => return encode_failure(e),
    };
    for db in blocked {
        formula.block(db);
    }
    let script = formula.smtlib();
    if let Some(path) = emit {
        if let Err(e) = std::fs::write(path, &script) {
            log::warn!("cannot write {}: {e}", path.display());
        }
    }
    match solve_script(&formula.store, &script, budget) {
        SolveResult::Unsat => BoundCheck::Equivalent,
        SolveResult::Timeout => BoundCheck::Inconclusive(InconclusiveReason::Timeout, format!("bound {k}")),
        SolveResult::Unknown(why) => BoundCheck::Inconclusive(InconclusiveReason::SolverError, why),
        SolveResult::Sat(model) => match decode_database(schema, &formula.db, &model) {
            Ok(db) => BoundCheck::NotEquivalent(db),
            Err(e) => BoundCheck::Inconclusive(InconclusiveReason::SolverError, e.to_string()),
        },
    }
}

/// Result of checking one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub elapsed: Duration,
    /// Models that failed validation, in the order found.
    pub spurious: Vec<ConcreteDb>,
}

/// Whether the two queries disagree on `db`. Evaluation errors count as
/// no disagreement. An unavailable external engine falls back to the
/// reference evaluator.
pub fn validate_counterexample(
    schema: &DatabaseSchema,
    gold: &Prepared,
    gen: &Prepared,
    db: &ConcreteDb,
    backend: ValidationBackend,
) -> bool {
    if backend == ValidationBackend::Sqlite {
        match sqlite::run_queries(schema, db, &[&gold.sql, &gen.sql]) {
            Ok(r) => return !same_row_set(&r[0], &r[1]),
            Err(e) => log::warn!("external validation unavailable ({e}); using the reference evaluator"),
        }
    }
    match ex_compare(&gold.query, &gen.query, db) {
        Ok(same) => !same,
        Err(e) => {
            log::debug!("validation evaluation failed: {e}");
            false
        }
    }
}

/// Searches bounds 1..=K for a validated counterexample.
pub fn eqcheck(schema: &DatabaseSchema, gold: &Prepared, gen: &Prepared, cfg: &TaskConfig) -> CheckOutcome {
    let start = Instant::now();
    let mut spurious: Vec<ConcreteDb> = Vec::new();
    let verdict = eqcheck_inner(schema, gold, gen, cfg, start, &mut spurious);
    CheckOutcome {
        verdict,
        elapsed: start.elapsed(),
        spurious,
    }
}

fn eqcheck_inner(
    schema: &DatabaseSchema,
    gold: &Prepared,
    gen: &Prepared,
    cfg: &TaskConfig,
    start: Instant,
    spurious: &mut Vec<ConcreteDb>,
) -> Verdict {
    if cfg.max_bound == 0 {
        return Verdict::inconclusive(InconclusiveReason::Unsupported, "bound must be at least 1");
    }
    let opts = cfg.encode_options();
    let total = Duration::from_secs_f64(cfg.budget.cpu_seconds.max(0.0));
    let mut calls = 0usize;
    for k in 1..=cfg.max_bound {
        let mut failures = 0;
        loop {
            let left = total.saturating_sub(start.elapsed());
            if left.is_zero() {
                return Verdict::inconclusive(InconclusiveReason::Timeout, format!("budget spent before bound {k}"));
            }
            let budget = SolveBudget {
                cpu_seconds: left.as_secs_f64(),
                ..cfg.budget
            };
            let emit = cfg.emit_smtlib.as_ref().map(|d| d.join(format!("k{k}_call{calls}.smt2")));
            calls += 1;
            match check_bounded_blocking(schema, &gold.query, &gen.query, k, budget, &opts, spurious, emit.as_deref()) {
                BoundCheck::Equivalent => break,
                BoundCheck::Inconclusive(reason, detail) => return Verdict::Inconclusive { reason, detail },
                BoundCheck::NotEquivalent(db) => {
                    if validate_counterexample(schema, gold, gen, &db, cfg.validation_backend) {
                        return Verdict::NotEquivalent {
                            db,
                            bound: k,
                            validated: true,
                        };
                    }
                    log::info!("spurious counterexample at bound {k}");
                    spurious.push(db);
                    failures += 1;
                    if failures > cfg.retries {
                        return Verdict::inconclusive(
                            InconclusiveReason::SpuriousOnly,
                            format!("{failures} spurious models at bound {k}"),
                        );
                    }
                }
            }
        }
    }
    Verdict::EquivalentUpTo(cfg.max_bound)
}

/// Memoizes outcomes by schema, both queries and the configuration.
#[derive(Default)]
pub struct VerdictCache {
    map: Mutex<HashMap<String, CheckOutcome>>,
}

impl VerdictCache {
    pub fn key(schema: &DatabaseSchema, gold: &Query, gen: &Query, cfg: &TaskConfig) -> String {
        let mut h = Sha256::new();
        for part in [
            schema.content_hash(),
            query_to_sql(gold),
            query_to_sql(gen),
            cfg.fingerprint(),
        ] {
            h.update(part.as_bytes());
            h.update([0u8]);
        }
        hex::encode(h.finalize())
    }

    pub fn get_or_check(
        &self,
        schema: &DatabaseSchema,
        gold: &Prepared,
        gen: &Prepared,
        cfg: &TaskConfig,
    ) -> CheckOutcome {
        let key = Self::key(schema, &gold.query, &gen.query, cfg);
        if let Some(hit) = self.map.lock().expect("cache lock").get(&key) {
            return hit.clone();
        }
        let out = eqcheck(schema, gold, gen, cfg);
        self.map.lock().expect("cache lock").insert(key, out.clone());
        out
    }

    pub fn len(&self) -> usize {
        self.map.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One method's result on one question, as cross-checking sees it.
#[derive(Debug, Clone)]
pub struct CrossEntry<'a> {
    pub question_id: String,
    pub method: String,
    pub schema: &'a DatabaseSchema,
    pub gold: &'a Query,
    /// `None` when the prediction did not parse.
    pub gen: Option<&'a Query>,
    /// Counterexamples found by this entry's own check.
    pub found: Vec<ConcreteDb>,
    /// Counterexamples adopted from other methods.
    pub adopted: Vec<ConcreteDb>,
}

/// Pools the counterexamples of every question and tries each pooled
/// database on every method's prediction, adopting the ones on which the
/// prediction disagrees with the gold query. Returns the number adopted.
pub fn cross_check(entries: &mut [CrossEntry<'_>]) -> usize {
    entries.sort_by(|a, b| (&a.question_id, &a.method).cmp(&(&b.question_id, &b.method)));
    let mut pools: BTreeMap<String, BTreeMap<String, ConcreteDb>> = BTreeMap::new();
    for e in entries.iter() {
        let pool = pools.entry(e.question_id.clone()).or_default();
        for db in &e.found {
            pool.entry(db.content_hash(e.schema)).or_insert_with(|| db.clone());
        }
    }
    let mut adopted = 0;
    for e in entries.iter_mut() {
        let Some(gen) = e.gen else { continue };
        let Some(pool) = pools.get(&e.question_id) else { continue };
        let own: HashSet<String> = e.found.iter().map(|d| d.content_hash(e.schema)).collect();
        for (hash, db) in pool {
            if own.contains(hash) {
                continue;
            }
            if let Ok(false) = ex_compare(e.gold, gen, db) {
                e.adopted.push(db.clone());
                adopted += 1;
            }
        }
    }
    adopted
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_schema;

    fn schema() -> DatabaseSchema {
        load_schema(r#"{"tables":[{"name":"R","columns":[{"name":"id","type":"int"}]}]}"#).unwrap()
    }

    fn prep(sql: &str) -> Prepared {
        Prepared::parse(sql, &schema()).unwrap()
    }

    #[test]
    fn cross_check_adopts_only_disagreeing_dbs() {
        let s = schema();
        let gold = prep("SELECT id FROM R WHERE id > 1");
        let a = prep("SELECT id FROM R WHERE id > 2");
        let b = prep("SELECT id FROM R WHERE id >= 2");
        let c = prep("SELECT id FROM R WHERE id >= 3");
        let witness = ConcreteDb::from_rows(&s, vec![vec![vec![crate::value::Value::Int(2)]]]);
        let mut entries = vec![
            CrossEntry {
                question_id: "q".into(),
                method: "a".into(),
                schema: &s,
                gold: &gold.query,
                gen: Some(&a.query),
                found: vec![witness.clone()],
                adopted: vec![],
            },
            CrossEntry {
                question_id: "q".into(),
                method: "b".into(),
                schema: &s,
                gold: &gold.query,
                gen: Some(&b.query),
                found: vec![],
                adopted: vec![],
            },
            CrossEntry {
                question_id: "q".into(),
                method: "c".into(),
                schema: &s,
                gold: &gold.query,
                gen: Some(&c.query),
                found: vec![],
                adopted: vec![],
            },
        ];
        assert_eq!(cross_check(&mut entries), 1);
        assert!(entries[0].adopted.is_empty());
        assert!(entries[1].adopted.is_empty());
        assert_eq!(entries[2].adopted, vec![witness]);
    }

    #[test]
    fn empty_pool_changes_nothing() {
        let s = schema();
        let gold = prep("SELECT id FROM R");
        let mut entries = vec![CrossEntry {
            question_id: "q".into(),
            method: "a".into(),
            schema: &s,
            gold: &gold.query,
            gen: Some(&gold.query),
            found: vec![],
            adopted: vec![],
        }];
        assert_eq!(cross_check(&mut entries), 0);
    }

    #[test]
    fn reflexive_pair_never_validates() {
        let s = schema();
        let q = prep("SELECT id FROM R WHERE id > 1");
        let db = ConcreteDb::from_rows(&s, vec![vec![vec![crate::value::Value::Int(2)]]]);
        assert!(!validate_counterexample(&s, &q, &q, &db, ValidationBackend::Reference));
    }
}
