//! One PASS/FAIL line per acceptance criterion. Run with `--nocapture` to
//! see the lines.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Duration;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use common::*;
use sqlcex::db::ConcreteDb;
use sqlcex::encode::{alloc_symbolic_db, assignment_for_db, decode_relation, encode_query, EncodeOptions, Payload};
use sqlcex::eval::{eval_query, ex_compare, same_row_set};
use sqlcex::oracle::{oracle_check, DomainSpec, OracleVerdict};
use sqlcex::pipeline::score::{demotion_drop, score, QuestionOutcome};
use sqlcex::pipeline::{check_bounded, eqcheck, BoundCheck, InconclusiveReason, Prepared, TaskConfig, Verdict};
use sqlcex::schema::{load_schema, DatabaseSchema};
use sqlcex::smt::{smtlib, Lit, Store, Term};
use sqlcex::solver::{solve_script, SolveBudget, SolveResult};
use sqlcex::sql::parse_sql;
use sqlcex::value::{int_to_date, julian_day, Date, Value};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn need_solver() -> Result<(), String> {
    ensure(solver_ready(), || "no z3 binary (set SQLCEX_Z3)".into())
}

fn prepared(sql: &str, schema: &DatabaseSchema) -> Prepared {
    Prepared::parse(sql, schema).unwrap_or_else(|e| panic!("{sql}: {e}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Example 3: `id > 1` against `id > 2` is separated by one row with id 2.
fn c1_toy() -> Check {
    need_solver()?;
    let schema = fixture_schema("toy");
    let gold = prepared("SELECT id FROM R WHERE id > 1", &schema);
    let gen = prepared("SELECT id FROM R WHERE id > 2", &schema);
    let out = eqcheck(&schema, &gold, &gen, &TaskConfig::default());
    let secs = out.elapsed.as_secs_f64();
    let Verdict::NotEquivalent { db, bound, validated } = &out.verdict else {
        return Err(format!("verdict {:?}", out.verdict));
    };
    let rows = &db.table("R").unwrap().rows;
    ensure(*bound == 1 && *validated, || format!("bound {bound}, validated {validated}"))?;
    ensure(rows.len() == 1 && rows[0][0] == Value::Int(2), || format!("R = {rows:?}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("bound 1, R = {:?}, {secs:.3} s", rows[0]))
}

/// Every motivating pair that should differ gets a counterexample that both
/// engines confirm.
fn c2_motivating() -> Check {
    need_solver()?;
    let sqlite = ensure_sqlite();
    let entries: Vec<Entry> = corpus()
        .into_iter()
        .filter(|e| !EQUIVALENT_ENTRIES.contains(&e.question_id.as_str()) && e.db_id != "toy")
        .collect();
    let results: Vec<Result<f64, String>> = entries
        .par_iter()
        .map(|e| {
            let schema = fixture_schema(&e.db_id);
            let gold = prepared(&e.gold_sql, &schema);
            let gen = prepared(&e.predictions["baseline"], &schema);
            let out = eqcheck(&schema, &gold, &gen, &TaskConfig::default());
            let Some(db) = out.verdict.counterexample() else {
                return Err(format!("{}: {:?}", e.question_id, out.verdict));
            };
            if ex_compare(&gold.query, &gen.query, db) != Ok(false) {
                return Err(format!("{}: reference evaluator sees no difference", e.question_id));
            }
            if sqlite {
                match sqlcex::sqlite::run_queries(&schema, db, &[&gold.sql, &gen.sql]) {
                    Ok(r) if !same_row_set(&r[0], &r[1]) => {}
                    Ok(_) => return Err(format!("{}: SQLite sees no difference", e.question_id)),
                    Err(err) => return Err(format!("{}: SQLite failed: {err}", e.question_id)),
                }
            }
            Ok(out.elapsed.as_secs_f64())
        })
        .collect();
    let mut times = Vec::new();
    for r in results {
        times.push(r?);
    }
    ensure(times.len() >= 9, || format!("only {} pairs", times.len()))?;
    let med = median(times.clone());
    ensure(med < 10.0, || format!("median {med:.2} s"))?;
    Ok(format!(
        "{} pairs refuted, engines: reference{}, median {med:.3} s, max {:.3} s",
        times.len(),
        if sqlite { " + sqlite" } else { " only (no sqlite)" },
        times.iter().cloned().fold(0.0, f64::max)
    ))
}

/// The printed counterexample of the first motivating pair replays to the
/// stated outputs.
fn c3_replay() -> Check {
    let entry = corpus().into_iter().find(|e| e.question_id == "q01").unwrap();
    let schema = fixture_schema(&entry.db_id);
    let dump = std::fs::read_to_string(workspace().join("fixtures/replay/a1_medical.sql")).unwrap();
    let gen_sql = &entry.predictions["baseline"];
    let r = sqlcex::harness::replay(&schema, &dump, &entry.gold_sql, gen_sql).map_err(|e| e.to_string())?;
    let want = vec![vec![Value::Date(Date::new(1000, 1, 1).unwrap())]];
    ensure(r.gold.rows == want, || format!("gold returned {:?}", r.gold.rows))?;
    ensure(r.gen.rows.is_empty(), || format!("generated returned {:?}", r.gen.rows))?;
    ensure(r.ex == 0, || "EX = 1".into())?;
    let mut engines = "reference";
    if ensure_sqlite() {
        let db = ConcreteDb::from_insert_script(&dump, &schema).unwrap();
        let out = sqlcex::sqlite::run_queries(&schema, &db, &[&entry.gold_sql, gen_sql]).map_err(|e| e.to_string())?;
        ensure(out[0].rows.len() == 1 && out[1].rows.is_empty(), || {
            format!("SQLite: gold {:?}, generated {:?}", out[0].rows, out[1].rows)
        })?;
        engines = "reference + sqlite";
    }
    Ok(format!("gold -> 1000-01-01, generated -> no rows, EX=0 ({engines})"))
}

fn payload_terms(p: &Payload) -> Vec<Term> {
    match p {
        Payload::None => vec![],
        Payload::Int(t) | Payload::Str(t) => vec![*t],
        Payload::Real { num, den } => vec![*num, *den],
        Payload::Date { y, m, d } => vec![*y, *m, *d],
    }
}

/// Random expressions and predicates: the encoding, evaluated on the
/// assignment of a database, equals the reference evaluator's result, and
/// z3 agrees with every evaluated cell.
fn c4_differential() -> Check {
    need_solver()?;
    let schema = load_schema(EXPR_SCHEMA).unwrap();
    let k = 2;
    let mut opts = EncodeOptions::default();
    opts.max_str_len = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut store = Store::new();
    let symdb = alloc_symbolic_db(&mut store, &schema, k, &opts).unwrap();
    let mut queries = Vec::new();
    let mut rejected = 0;
    while queries.len() < 320 {
        let sql = ExprGen { rng: &mut rng }.query();
        let Ok(q) = parse_sql(&sql, &schema) else {
            rejected += 1;
            continue;
        };
        let tag = format!("e{}", queries.len());
        match encode_query(&mut store, &symdb, &q, &opts, &tag) {
            Ok(enc) => queries.push((sql, q, enc.result)),
            Err(_) => rejected += 1,
        }
    }
    let dbs: Vec<ConcreteDb> = (0..8).map(|i| random_db(&mut rng, &schema, k, if i == 0 { 0.6 } else { 0.2 })).collect();
    let mut cases = 0;
    let mut null_cells = 0;
    let mut covered: HashMap<&str, usize> = HashMap::new();
    let features = [
        "AS INTEGER", "AS REAL", "AS TEXT", "AS DATE", "SUBSTR", "STRFTIME", "JULIANDAY", "LIKE 'a%'", "LIKE '%b'",
        "LIKE '%b%'", "IS NULL", "IS NOT NULL", "DATE(", "COALESCE", "CASE", "IIF", " / ", " % ",
    ];
    for db in &dbs {
        let asg = assignment_for_db(&symdb, db).unwrap();
        let mut pins: Vec<(Term, Lit)> = Vec::new();
        for (sql, q, rel) in &queries {
            let Ok(expected) = eval_query(db, q) else { continue };
            let got = decode_relation(&store, rel, &asg).map_err(|e| format!("{sql}: {e}"))?;
            if got != expected {
                return Err(format!(
                    "{sql}\n  db: {}  expected {:?}\n  encoded {:?}",
                    db.insert_script(),
                    expected.rows,
                    got.rows
                ));
            }
            cases += 1;
            for f in features {
                if sql.contains(f) {
                    *covered.entry(f).or_default() += 1;
                }
            }
            null_cells += expected.rows.iter().flatten().filter(|v| v.is_null()).count();
            for t in &rel.tuples {
                let alive = store.eval(t.alive, &asg);
                let live = alive.as_bool();
                pins.push((t.alive, alive));
                if !live {
                    continue;
                }
                for v in &t.vals {
                    let null = store.eval(v.null, &asg);
                    let is_null = null.as_bool();
                    pins.push((v.null, null));
                    if !is_null {
                        for p in payload_terms(&v.pay) {
                            pins.push((p, store.eval(p, &asg)));
                        }
                    }
                }
            }
        }
        // z3 must find no database agreeing with this one on its cells
        // whose derived values differ from the evaluated ones
        let mut assertions = symdb.constraints.clone();
        let mut fixed: Vec<(Term, Lit)> = asg.iter().map(|(t, l)| (*t, l.clone())).collect();
        fixed.sort_by_key(|(t, _)| t.index());
        for (t, l) in fixed {
            let c = store.lit(l);
            assertions.push(store.eq(t, c));
        }
        let differs: Vec<Term> = pins
            .into_iter()
            .map(|(t, l)| {
                let c = store.lit(l);
                let e = store.eq(t, c);
                store.not(e)
            })
            .collect();
        assertions.push(store.or(differs));
        let script = smtlib::script(&store, &assertions, &[]);
        match solve_script(&store, &script, SolveBudget::seconds(120.0)) {
            SolveResult::Unsat => {}
            other => return Err(format!("solver route disagrees on db {}: {other:?}", db.insert_script())),
        }
    }
    ensure(cases >= 1000, || format!("only {cases} cases"))?;
    let missing: Vec<&str> = features.iter().filter(|f| !covered.contains_key(*f)).copied().collect();
    ensure(missing.is_empty(), || format!("features never exercised: {missing:?}"))?;
    ensure(null_cells > 0, || "no NULL results".into())?;
    Ok(format!(
        "{cases} cases over {} queries x {} dbs, 0 mismatches, {null_cells} NULL cells, {rejected} generated queries outside the subset",
        queries.len(),
        dbs.len()
    ))
}

/// Random query pairs: solver verdicts equal brute-force verdicts over the
/// same finite domain.
fn c5_oracle() -> Check {
    need_solver()?;
    let schema = load_schema(PAIR_SCHEMA).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut pairs = Vec::new();
    while pairs.len() < 240 {
        let (a, b) = PairGen { rng: &mut rng }.pair();
        if let (Ok(qa), Ok(qb)) = (parse_sql(&a, &schema), parse_sql(&b, &schema)) {
            pairs.push((a, b, qa, qb));
        }
    }
    let results: Vec<Result<Option<bool>, String>> = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (a, b, qa, qb))| {
            let k = 1 + i % 2;
            let spec = DomainSpec {
                ints: vec![0, 1],
                strs: vec!["a".into(), "b".into()],
                dates: vec![],
                k,
                ..DomainSpec::default()
            };
            let oracle = match oracle_check(&schema, qa, qb, &spec) {
                Ok(v) => v,
                Err(_) => return Ok(None),
            };
            let cfg = TaskConfig {
                max_bound: k,
                exclude_degenerate: false,
                pools: Some(spec),
                budget: SolveBudget::seconds(120.0),
                ..TaskConfig::default()
            };
            let out = eqcheck(&schema, &prepared(a, &schema), &prepared(b, &schema), &cfg);
            match (&oracle, &out.verdict) {
                (OracleVerdict::Equivalent, Verdict::EquivalentUpTo(_)) => Ok(Some(true)),
                (OracleVerdict::NotEquivalent(_), Verdict::NotEquivalent { db, .. }) => {
                    if ex_compare(qa, qb, db) != Ok(false) || db.max_rows() > k {
                        Err(format!("bad witness for {a} / {b}: {}", db.insert_script()))
                    } else {
                        Ok(Some(false))
                    }
                }
                (o, v) => Err(format!("k={k}: {a}  vs  {b}\n  oracle {o:?}\n  solver {v:?}")),
            }
        })
        .collect();
    let (mut eq, mut ne, mut skipped) = (0, 0, 0);
    for r in results {
        match r? {
            Some(true) => eq += 1,
            Some(false) => ne += 1,
            None => skipped += 1,
        }
    }
    ensure(eq + ne >= 200, || format!("only {} pairs compared", eq + ne))?;
    Ok(format!("{} pairs agree ({eq} equivalent, {ne} refuted, k in 1..=2), {skipped} skipped", eq + ne))
}

fn rat(r: &BigRational) -> f64 {
    r.to_f64().unwrap()
}

fn dates_between(a: Date, b: Date) -> Vec<Date> {
    let mut out = vec![a];
    while *out.last().unwrap() != b {
        out.push(out.last().unwrap().succ().unwrap());
    }
    out
}

fn c6_julian() -> Check {
    let d = Date::new(2000, 1, 1).unwrap();
    let jd = julian_day(&Value::Date(d)).map_err(|e| e.to_string())?;
    ensure(jd == BigRational::new(4903089.into(), 2.into()), || format!("evaluator gives {jd}"))?;

    let unit_schema = load_schema(r#"{"tables":[{"name":"R","columns":[{"name":"d","type":"date"}]}]}"#).unwrap();
    let opts = EncodeOptions::default();
    let mut store = Store::new();
    let symdb = alloc_symbolic_db(&mut store, &unit_schema, 1, &opts).unwrap();
    let q = parse_sql("SELECT JULIANDAY(DATE('2000-01-01'))", &unit_schema).unwrap();
    let enc = encode_query(&mut store, &symdb, &q, &opts, "c").map_err(|e| e.to_string())?;
    let Payload::Real { num, den } = enc.result.tuples[0].vals[0].pay else {
        return Err("JULIANDAY did not encode to a real".into());
    };
    let (Some(n), Some(dn)) = (store.const_int(num), store.const_int(den)) else {
        return Err("encoder did not fold the constant".into());
    };
    let folded = BigRational::new(n.clone(), dn.clone());
    ensure(folded == jd, || format!("encoder folds to {folded}"))?;

    let q = parse_sql("SELECT JULIANDAY(d) FROM R", &unit_schema).unwrap();
    let enc = encode_query(&mut store, &symdb, &q, &opts, "m").map_err(|e| e.to_string())?;
    let Payload::Real { num, den } = enc.result.tuples[0].vals[0].pay else {
        return Err("JULIANDAY(d) did not encode to a real".into());
    };
    let mut checked = 0;
    for (a, b) in [((1999, 1, 1), (2001, 12, 31)), ((1896, 1, 1), (1904, 12, 31))] {
        let span = dates_between(Date::new(a.0, a.1, a.2).unwrap(), Date::new(b.0, b.1, b.2).unwrap());
        let mut prev: Option<(f64, f64)> = None;
        for d in span {
            let ev = rat(&julian_day(&Value::Date(d)).unwrap());
            let db = ConcreteDb::from_rows(&unit_schema, vec![vec![vec![Value::Date(d)]]]);
            let asg = assignment_for_db(&symdb, &db).unwrap();
            let en = rat(&BigRational::new(
                store.eval(num, &asg).as_int().clone(),
                store.eval(den, &asg).as_int().clone(),
            ));
            ensure(ev == en, || format!("{d:?}: evaluator {ev}, encoder {en}"))?;
            if let Some((pe, pn)) = prev {
                ensure(ev - pe == 1.0 && en - pn == 1.0, || format!("step at {d:?} is not one day"))?;
            }
            prev = Some((ev, en));
            checked += 1;
        }
    }
    Ok(format!("JULIANDAY(2000-01-01) = 2451544.5 (evaluator, folded encoder), {checked} days step by 1"))
}

/// Validity by round trip through an independent day-number conversion.
fn calendar_oracle(y: i64, m: i64, d: i64) -> bool {
    if !(1..=12).contains(&m) || d < 1 {
        return false;
    }
    let a = (14 - m) / 12;
    let yy = y + 4800 - a;
    let mm = m + 12 * a - 3;
    let jdn = d + (153 * mm + 2) / 5 + 365 * yy + yy / 4 - yy / 100 + yy / 400 - 32045;
    let a = jdn + 32044;
    let b = (4 * a + 3) / 146097;
    let c = a - 146097 * b / 4;
    let dd = (4 * c + 3) / 1461;
    let e = c - 1461 * dd / 4;
    let mo = (5 * e + 2) / 153;
    let day = e - (153 * mo + 2) / 5 + 1;
    let month = mo + 3 - 12 * (mo / 10);
    let year = 100 * b + dd - 4800 + mo / 10;
    (year, month, day) == (y, m, d)
}

fn c7_dates() -> Check {
    let schema = load_schema(r#"{"tables":[{"name":"R","columns":[{"name":"x","type":"int"},{"name":"d","type":"date"}]}]}"#)
        .unwrap();
    let opts = EncodeOptions::default();
    let mut store = Store::new();
    let symdb = alloc_symbolic_db(&mut store, &schema, 1, &opts).unwrap();
    let q = parse_sql("SELECT CAST(x AS DATE) FROM R", &schema).unwrap();
    let enc = encode_query(&mut store, &symdb, &q, &opts, "c").map_err(|e| e.to_string())?;
    let cast_null = enc.result.tuples[0].vals[0].null;
    let table = &symdb.tables[0];
    let (x_null, x) = (table.cells[0][0].null, table.cells[0][0].payload[0]);
    let d_cell = &table.cells[0][1];
    let (mut oracle_n, mut eval_n, mut int_n, mut enc_cast_n, mut enc_dom_n) = (0, 0, 0, 0, 0);
    for y in 1896..=1904 {
        for m in 0..=13 {
            for d in 0..=32 {
                let want = calendar_oracle(y, m, d);
                let by_eval = Date::new(y, m, d).is_some();
                let by_int = int_to_date(y * 10000 + m * 100 + d).is_some();
                let mut asg = sqlcex::smt::Assignment::new();
                asg.insert(table.alive[0], Lit::Bool(true));
                asg.insert(x_null, Lit::Bool(false));
                asg.insert(x, Lit::Int((y * 10000 + m * 100 + d).into()));
                asg.insert(d_cell.null, Lit::Bool(false));
                for (v, n) in d_cell.payload.iter().zip([y, m, d]) {
                    asg.insert(*v, Lit::Int(n.into()));
                }
                let by_cast = !store.eval(cast_null, &asg).as_bool();
                let by_domain = symdb.constraints.iter().all(|c| store.eval(*c, &asg).as_bool());
                let flags = [by_eval, by_int, by_cast, by_domain];
                ensure(flags.iter().all(|f| *f == want), || {
                    format!("{y:04}-{m:02}-{d:02}: oracle {want}, evaluator/int/cast/domain {flags:?}")
                })?;
                oracle_n += usize::from(want);
                eval_n += usize::from(by_eval);
                int_n += usize::from(by_int);
                enc_cast_n += usize::from(by_cast);
                enc_dom_n += usize::from(by_domain);
            }
        }
    }
    ensure(oracle_n == 3287, || format!("oracle counts {oracle_n}"))?;
    let _ = (eval_n, int_n, enc_cast_n, enc_dom_n);
    Ok(format!("{oracle_n} valid dates in 1896-1904 from 9 x 14 x 33 triples; evaluator, int_to_date and both encoder routes agree"))
}

/// Counterexamples are found at the smallest bound and stay witnesses at
/// every larger bound.
fn c8_minimality() -> Check {
    need_solver()?;
    let cfg = TaskConfig::default();
    let opts = cfg.encode_options();
    let budget = SolveBudget::seconds(300.0);
    // above the found bound the carried-over witness already shows the
    // formula is satisfiable; the solver only has to avoid saying unsat
    let above = SolveBudget::seconds(60.0);
    let rows: Vec<Result<String, String>> = corpus()
        .par_iter()
        .map(|e| {
            let schema = fixture_schema(&e.db_id);
            let gold = prepared(&e.gold_sql, &schema);
            let gen = prepared(&e.predictions["baseline"], &schema);
            let out = eqcheck(&schema, &gold, &gen, &cfg);
            let qid = &e.question_id;
            match &out.verdict {
                Verdict::NotEquivalent { db, bound, .. } => {
                    for k in 1..*bound {
                        let r = check_bounded(&schema, &gold.query, &gen.query, k, budget, &opts);
                        if r != BoundCheck::Equivalent {
                            return Err(format!("{qid}: found at {bound} but bound {k} gave {r:?}"));
                        }
                    }
                    let mut open = Vec::new();
                    for k in *bound..=cfg.max_bound {
                        if db.max_rows() > k || ex_compare(&gold.query, &gen.query, db) != Ok(false) {
                            return Err(format!("{qid}: witness does not carry over to bound {k}"));
                        }
                        match check_bounded(&schema, &gold.query, &gen.query, k, above, &opts) {
                            BoundCheck::NotEquivalent(_) => {}
                            BoundCheck::Inconclusive(
                                why @ (InconclusiveReason::BoundOverflow | InconclusiveReason::Timeout),
                                _,
                            ) => open.push(format!("{k}:{why:?}")),
                            r => return Err(format!("{qid}: refuted at {bound} but bound {k} gave {r:?}")),
                        }
                    }
                    if open.is_empty() {
                        Ok(format!("{qid}@{bound}"))
                    } else {
                        Ok(format!("{qid}@{bound}({})", open.join(",")))
                    }
                }
                Verdict::EquivalentUpTo(k) => {
                    for kk in 1..=*k {
                        let r = check_bounded(&schema, &gold.query, &gen.query, kk, budget, &opts);
                        if r != BoundCheck::Equivalent {
                            return Err(format!("{qid}: equivalent up to {k} but bound {kk} gave {r:?}"));
                        }
                    }
                    Ok(format!("{qid}=EQ"))
                }
                v => Err(format!("{qid}: {v:?}")),
            }
        })
        .collect();
    let mut ok = Vec::new();
    for r in rows {
        ok.push(r?);
    }
    Ok(format!("{} corpus pairs: {}", ok.len(), ok.join(" ")))
}

fn c9_scores() -> Check {
    let o = |q: &str, m: &str, ex: bool, own: bool, cc: bool| QuestionOutcome {
        question_id: q.into(),
        method: m.into(),
        ex: Some(ex),
        own_counterexample: own,
        cross_counterexample: cc,
    };
    let outcomes = [
        o("1", "A", true, true, false),
        o("1", "B", true, false, true),
        o("2", "A", false, false, false),
        o("2", "B", true, false, false),
        o("3", "A", true, false, false),
        o("3", "B", true, true, false),
    ];
    let rows = score(&outcomes);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let (a, b) = (&rows[0], &rows[1]);
    let want = [
        (a.ex_accuracy, 200.0 / 3.0),
        (a.verify_accuracy, 100.0 / 3.0),
        (a.verify_cc_accuracy, 100.0 / 3.0),
        (b.ex_accuracy, 100.0),
        (b.verify_accuracy, 200.0 / 3.0),
        (b.verify_cc_accuracy, 100.0 / 3.0),
    ];
    for (i, (got, exp)) in want.iter().enumerate() {
        ensure(close(*got, *exp), || format!("accuracy #{i}: {got} vs {exp}"))?;
    }
    let ranks = [a.ex_rank, b.ex_rank, a.verify_rank, b.verify_rank, a.verify_cc_rank, b.verify_cc_rank];
    ensure(ranks == [2, 1, 2, 1, 1, 2], || format!("ranks {ranks:?}"))?;
    let drop = demotion_drop(207, 1533);
    ensure(format!("{drop:.2}") == "13.50", || format!("drop {drop}"))?;
    let demoted = 1533.0 * (71.32 - 57.82) / 100.0;
    ensure((demoted - 207.0_f64).abs() < 0.5, || format!("1533 x 13.50% = {demoted}"))?;
    Ok(format!("hand-computed accuracies and ranks reproduced; 207/1533 -> {drop:.2} points"))
}

/// `MAX(id)` and `ORDER BY id DESC LIMIT 1` differ only on the empty table,
/// a degenerate counterexample.
fn c10_degenerate() -> Check {
    need_solver()?;
    let schema = load_schema(r#"{"tables":[{"name":"R","columns":[{"name":"id","type":"int"}]}]}"#).unwrap();
    let gold_sql = "SELECT MAX(id) FROM R";
    let gen_sql = "SELECT id FROM R ORDER BY id DESC LIMIT 1";
    let gold = prepared(gold_sql, &schema);
    let gen = prepared(gen_sql, &schema);
    let on = eqcheck(&schema, &gold, &gen, &TaskConfig::default());
    ensure(on.verdict == Verdict::EquivalentUpTo(5), || format!("excluded: {:?}", on.verdict))?;
    let off_cfg = TaskConfig {
        exclude_degenerate: false,
        ..TaskConfig::default()
    };
    let off = eqcheck(&schema, &gold, &gen, &off_cfg);
    let Verdict::NotEquivalent { db, validated: true, .. } = &off.verdict else {
        return Err(format!("allowed: {:?}", off.verdict));
    };
    ensure(db.total_rows() == 0, || format!("witness {}", db.insert_script()))?;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    std::fs::write(&path, schema.to_json()).unwrap();
    let run = |flag: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_sqlcex"))
            .args(["check", "--schema"])
            .arg(&path)
            .args(["--gold", gold_sql, "--gen", gen_sql, "--exclude-degenerate", flag])
            .output()
            .unwrap();
        String::from_utf8_lossy(&out.stdout).to_string()
    };
    let (cli_on, cli_off) = (run("true"), run("false"));
    ensure(cli_on.starts_with("equivalent up to bound 5"), || format!("CLI on: {cli_on}"))?;
    ensure(cli_off.starts_with("not equivalent"), || format!("CLI off: {cli_off}"))?;
    Ok("flag on -> EquivalentUpTo(5), flag off -> NotEquivalent on the empty table (library and CLI)".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("toy pair refuted at bound 1 by id=2", c1_toy),
        ("motivating pairs refuted and confirmed", c2_motivating),
        ("printed counterexample replays", c3_replay),
        ("encoder/evaluator differential", c4_differential),
        ("solver agrees with brute force", c5_oracle),
        ("julian day", c6_julian),
        ("date validity 1896-1904", c7_dates),
        ("minimality and monotonicity", c8_minimality),
        ("score arithmetic", c9_scores),
        ("degenerate exclusion flag", c10_degenerate),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = Duration::from(start.elapsed()).as_secs_f64();
        match r {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1} s]", i + 1),
            Err(why) => {
                println!("criterion {:>2} FAIL  {name}: {why} [{secs:.1} s]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
