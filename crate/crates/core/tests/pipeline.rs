mod common;

use common::*;
use sqlcex::db::ConcreteDb;
use sqlcex::encode::TieMode;
use sqlcex::eval::ex_metric;
use sqlcex::pipeline::{
    check_bounded, cross_check, eqcheck, BoundCheck, CrossEntry, InconclusiveReason, Prepared, TaskConfig, Verdict,
    VerdictCache,
};
use sqlcex::schema::load_schema;
use sqlcex::sql::ast::{Attr, Expr};
use sqlcex::sql::{ParseError, Query};
use sqlcex::solver::SolveBudget;
use sqlcex::value::{ArithOp, Value};

const TIES: &str = r#"{"tables":[{"name":"R","columns":[{"name":"id","type":"int"},{"name":"v","type":"int"}]}]}"#;

fn cfg() -> TaskConfig {
    TaskConfig {
        max_bound: 3,
        budget: SolveBudget::seconds(120.0),
        ..TaskConfig::default()
    }
}

#[test]
fn identical_queries_are_equivalent() {
    if !solver_ready() {
        return;
    }
    let schema = fixture_schema("toy");
    let q = Prepared::parse("SELECT id FROM R WHERE dob > '2000-01-01'", &schema).unwrap();
    assert_eq!(eqcheck(&schema, &q, &q, &cfg()).verdict, Verdict::EquivalentUpTo(3));
    let r = check_bounded(&schema, &q.query, &q.query, 2, SolveBudget::seconds(60.0), &cfg().encode_options());
    assert_eq!(r, BoundCheck::Equivalent);
}

#[test]
fn bound_one_witness_disagrees() {
    if !solver_ready() {
        return;
    }
    let schema = fixture_schema("toy");
    let g = Prepared::parse("SELECT id FROM R WHERE id >= 2", &schema).unwrap();
    let p = Prepared::parse("SELECT id FROM R WHERE id > 2", &schema).unwrap();
    let out = eqcheck(&schema, &g, &p, &cfg());
    let Verdict::NotEquivalent { db, bound, validated } = out.verdict else {
        panic!("{:?}", out.verdict)
    };
    assert_eq!(bound, 1);
    assert!(validated);
    assert_eq!(db.table("R").unwrap().rows[0][0], Value::Int(2));
    assert_eq!(ex_metric(&g.query, &p.query, &db), 0);
}

#[test]
fn unsupported_features_are_reported() {
    let schema = fixture_schema("toy");
    let err = Prepared::parse("SELECT CAST(id AS REAL) % 2 FROM R", &schema).unwrap_err();
    assert!(matches!(err, ParseError::Unsupported { .. }), "{err:?}");
    // the gate also holds for trees that did not come from the parser
    let g = Prepared::parse("SELECT id FROM R", &schema).unwrap();
    let e = Expr::Arith(
        ArithOp::Mod,
        Box::new(Expr::Lit(Value::real(3, 2))),
        Box::new(Expr::Lit(Value::Int(1))),
    );
    let q = Query::Project {
        input: Box::new(Query::Unit),
        items: vec![Attr { expr: e, alias: None }],
    };
    let r = check_bounded(&schema, &g.query, &q, 1, SolveBudget::seconds(10.0), &cfg().encode_options());
    assert!(matches!(r, BoundCheck::Inconclusive(InconclusiveReason::Unsupported, _)), "{r:?}");
}

#[test]
fn zero_bound_is_rejected() {
    let schema = fixture_schema("toy");
    let q = Prepared::parse("SELECT id FROM R", &schema).unwrap();
    let c = TaskConfig {
        max_bound: 0,
        ..cfg()
    };
    assert!(matches!(eqcheck(&schema, &q, &q, &c).verdict, Verdict::Inconclusive { .. }));
}

#[test]
fn arbitrary_ties_yield_only_spurious_models() {
    if !solver_ready() {
        return;
    }
    let schema = load_schema(TIES).unwrap();
    let g = Prepared::parse("SELECT id FROM R ORDER BY v LIMIT 1", &schema).unwrap();
    let p = Prepared::parse("SELECT id FROM (SELECT * FROM R) ORDER BY v LIMIT 1", &schema).unwrap();
    let mut c = cfg();
    assert_eq!(eqcheck(&schema, &g, &p, &c).verdict, Verdict::EquivalentUpTo(3));
    c.ties = TieMode::Arbitrary;
    let out = eqcheck(&schema, &g, &p, &c);
    match out.verdict {
        Verdict::Inconclusive {
            reason: InconclusiveReason::SpuriousOnly,
            ..
        } => {}
        v => panic!("{v:?}"),
    }
    assert_eq!(out.spurious.len(), c.retries + 1);
    for db in &out.spurious {
        assert_eq!(ex_metric(&g.query, &p.query, db), 1);
    }
}

#[test]
fn tiny_budget_times_out() {
    if !solver_ready() {
        return;
    }
    let schema = fixture_schema("toy");
    let g = Prepared::parse("SELECT id FROM R", &schema).unwrap();
    let c = TaskConfig {
        budget: SolveBudget::seconds(0.0),
        ..cfg()
    };
    match eqcheck(&schema, &g, &g, &c).verdict {
        Verdict::Inconclusive {
            reason: InconclusiveReason::Timeout,
            ..
        } => {}
        v => panic!("{v:?}"),
    }
}

#[test]
fn cache_keys_and_hits() {
    let schema = fixture_schema("toy");
    let a = Prepared::parse("SELECT id FROM R", &schema).unwrap();
    let a2 = Prepared::parse("select  id  from R", &schema).unwrap();
    let b = Prepared::parse("SELECT id FROM R WHERE id > 0", &schema).unwrap();
    let c = cfg();
    let k = |x: &Prepared, y: &Prepared, c: &TaskConfig| VerdictCache::key(&schema, &x.query, &y.query, c);
    assert_eq!(k(&a, &b, &c), k(&a2, &b, &c));
    assert_ne!(k(&a, &b, &c), k(&b, &a, &c));
    let other = TaskConfig {
        max_bound: 4,
        ..cfg()
    };
    assert_ne!(k(&a, &b, &c), k(&a, &b, &other));
    let other_schema = load_schema(TIES).unwrap();
    let b_other = Prepared::parse("SELECT id FROM R WHERE id > 0", &other_schema).unwrap();
    assert_ne!(
        VerdictCache::key(&other_schema, &a.query, &b_other.query, &c),
        k(&a, &b, &c)
    );

    if !solver_ready() {
        return;
    }
    let cache = VerdictCache::default();
    assert!(cache.is_empty());
    let first = cache.get_or_check(&schema, &a, &b, &c);
    let second = cache.get_or_check(&schema, &a2, &b, &c);
    assert_eq!(cache.len(), 1);
    assert_eq!(first, second);
}

#[test]
fn cross_check_adopts_only_disagreeing_databases() {
    let schema = fixture_schema("toy");
    let gold = Prepared::parse("SELECT id FROM R WHERE id > 1", &schema).unwrap();
    let m1 = Prepared::parse("SELECT id FROM R WHERE id > 2", &schema).unwrap();
    let m2 = Prepared::parse("SELECT id FROM R", &schema).unwrap();
    let db = |id: i64| ConcreteDb::from_rows(&schema, vec![vec![vec![Value::Int(id), Value::Null]]]);
    // db(2) refutes m1 only, db(1) refutes m2 only
    let mut entries = vec![
        CrossEntry {
            question_id: "q".into(),
            method: "m1".into(),
            schema: &schema,
            gold: &gold.query,
            gen: Some(&m1.query),
            found: vec![db(2)],
            adopted: vec![],
        },
        CrossEntry {
            question_id: "q".into(),
            method: "m2".into(),
            schema: &schema,
            gold: &gold.query,
            gen: Some(&m2.query),
            found: vec![db(1)],
            adopted: vec![],
        },
        CrossEntry {
            question_id: "other".into(),
            method: "m2".into(),
            schema: &schema,
            gold: &gold.query,
            gen: Some(&m2.query),
            found: vec![],
            adopted: vec![],
        },
        CrossEntry {
            question_id: "q".into(),
            method: "broken".into(),
            schema: &schema,
            gold: &gold.query,
            gen: None,
            found: vec![],
            adopted: vec![],
        },
    ];
    assert_eq!(cross_check(&mut entries), 0);
    let both = Prepared::parse("SELECT id FROM R WHERE id > 5", &schema).unwrap();
    let i = entries.iter().position(|e| e.method == "m2" && e.question_id == "q").unwrap();
    entries[i].gen = Some(&both.query);
    assert_eq!(cross_check(&mut entries), 1);
    let e = entries.iter().find(|e| e.method == "m2" && e.question_id == "q").unwrap();
    assert_eq!(e.adopted, vec![db(2)]);
    assert!(entries.iter().filter(|e| e.question_id == "other").all(|e| e.adopted.is_empty()));
}
