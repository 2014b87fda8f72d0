#![allow(dead_code)]

use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sqlcex::db::ConcreteDb;
use sqlcex::schema::{load_schema, DatabaseSchema, SqlType};
use sqlcex::value::{Date, Value};

pub fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_schema(db_id: &str) -> DatabaseSchema {
    let p = workspace().join("fixtures/motivating/schemas").join(format!("{db_id}.json"));
    load_schema(&std::fs::read_to_string(&p).unwrap()).unwrap()
}

pub fn solver_ready() -> bool {
    sqlcex::solver::solver_available()
}

/// Points the external engine at the bundled shim when no `sqlite3` is
/// installed. Returns whether an engine is usable.
pub fn ensure_sqlite() -> bool {
    if std::env::var_os(sqlcex::sqlite::SQLITE_ENV).is_none() && !sqlcex::sqlite::sqlite_available() {
        let shim = workspace().join("tools/sqlite3-shim.py");
        if shim.is_file() && std::process::Command::new("python3").arg("--version").output().is_ok() {
            std::env::set_var(sqlcex::sqlite::SQLITE_ENV, shim);
        }
    }
    sqlcex::sqlite::sqlite_available()
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct Entry {
    pub question_id: String,
    pub db_id: String,
    pub gold_sql: String,
    pub predictions: std::collections::BTreeMap<String, String>,
}

pub fn corpus() -> Vec<Entry> {
    let text = std::fs::read_to_string(workspace().join("fixtures/motivating/dataset.jsonl")).unwrap();
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// Entries whose prediction is expected to be equivalent to the gold query.
pub const EQUIVALENT_ENTRIES: &[&str] = &["q10"];

pub const EXPR_SCHEMA: &str = r#"{"tables":[
  {"name":"R","columns":[{"name":"id","type":"int"},{"name":"x","type":"int"},
    {"name":"s","type":"str"},{"name":"d","type":"date"}]}
]}"#;

const STRS: &[&str] = &[
    "", "a", "ab", "abc", "-", "+-", "10", "-7", "007", "2000-01-01", "1999-12-31", "2000-02-30", "a%b", "_x",
    "B", " 5", "12ab",
];

pub fn random_value(rng: &mut ChaCha8Rng, ty: SqlType, null_p: f64) -> Value {
    if rng.gen_bool(null_p) {
        return Value::Null;
    }
    match ty {
        SqlType::Int => Value::Int(rng.gen_range(-3..=12)),
        SqlType::Str => Value::str(*STRS.choose(rng).unwrap()),
        SqlType::Date => loop {
            let y = *[1896, 1900, 1999, 2000, 2001, 1000].choose(rng).unwrap();
            if let Some(d) = Date::new(y, rng.gen_range(1..=12), rng.gen_range(1..=31)) {
                return Value::Date(d);
            }
        },
    }
}

pub fn random_db(rng: &mut ChaCha8Rng, schema: &DatabaseSchema, k: usize, null_p: f64) -> ConcreteDb {
    loop {
        let rows = schema
            .tables
            .iter()
            .map(|t| {
                let n = rng.gen_range(0..=k);
                (0..n)
                    .map(|_| t.columns.iter().map(|c| random_value(rng, c.ty, null_p)).collect())
                    .collect()
            })
            .collect();
        let db = ConcreteDb::from_rows(schema, rows);
        if db.conforms(schema).is_ok() {
            return db;
        }
    }
}

/// Random well-typed expressions and predicates over `R(id, x, s, d)`.
pub struct ExprGen<'r> {
    pub rng: &'r mut ChaCha8Rng,
}

impl ExprGen<'_> {
    fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    pub fn int(&mut self, depth: u32) -> String {
        if depth == 0 {
            return match self.pick(3) {
                0 => "id".into(),
                1 => "x".into(),
                _ => self.rng.gen_range(-3..=10).to_string(),
            };
        }
        let d = depth - 1;
        match self.pick(13) {
            0 => format!("({} + {})", self.int(d), self.int(d)),
            1 => format!("({} - {})", self.int(d), self.int(d)),
            2 => format!("({} * {})", self.int(d), self.int(d)),
            3 => format!("({} / {})", self.int(d), self.int(d)),
            4 => format!("({} % {})", self.int(d), self.int(d)),
            5 => format!("CAST({} AS INTEGER)", self.str(d)),
            6 => format!("CAST({} AS INTEGER)", self.real(d)),
            7 => format!("CAST(STRFTIME('{}', {}) AS INTEGER)", self.fmt(), self.date(d)),
            8 => format!("CASE WHEN {} THEN {} ELSE {} END", self.pred(d), self.int(d), self.int(d)),
            9 => format!("COALESCE({}, {})", self.int(d), self.int(d)),
            10 => format!("IIF({}, {}, {})", self.pred(d), self.int(d), self.int(d)),
            11 => format!("CAST({} AS INTEGER)", self.date(d)),
            _ => self.int(0),
        }
    }

    pub fn real(&mut self, depth: u32) -> String {
        let d = depth.saturating_sub(1);
        match self.pick(6) {
            0 => format!("JULIANDAY({})", self.date(d)),
            1 => format!("CAST({} AS REAL)", self.int(d)),
            2 => format!("({} * 1.5)", self.int(d)),
            3 => format!("({} / 2.0)", self.int(d)),
            4 => format!("(JULIANDAY({}) - JULIANDAY({}))", self.date(d), self.date(d)),
            _ => format!("CAST({} AS REAL)", self.str(d)),
        }
    }

    fn fmt(&mut self) -> &'static str {
        ["%Y", "%m", "%d"][self.pick(3)]
    }

    pub fn str(&mut self, depth: u32) -> String {
        if depth == 0 {
            return match self.pick(3) {
                0 | 1 => "s".into(),
                _ => format!("'{}'", STRS.choose(self.rng).unwrap()),
            };
        }
        let d = depth - 1;
        match self.pick(9) {
            0 => format!("CAST({} AS TEXT)", self.int(d)),
            1 => format!("CAST({} AS TEXT)", self.date(d)),
            2 => format!("SUBSTR({}, {})", self.str(d), self.int(d)),
            3 => format!("SUBSTR({}, {}, {})", self.str(d), self.int(d), self.int(d)),
            4 => format!("STRFTIME('{}', {})", self.fmt(), self.date(d)),
            5 => format!("COALESCE({}, 'z')", self.str(d)),
            6 => format!("CASE WHEN {} THEN {} ELSE {} END", self.pred(d), self.str(d), self.str(d)),
            _ => self.str(0),
        }
    }

    pub fn date(&mut self, depth: u32) -> String {
        if depth == 0 {
            return match self.pick(3) {
                0 | 1 => "d".into(),
                _ => "DATE('2000-02-29')".into(),
            };
        }
        let d = depth - 1;
        match self.pick(4) {
            0 => format!("CAST({} AS DATE)", self.str(d)),
            1 => format!("CAST({} AS DATE)", self.int(d)),
            2 => format!("DATE({})", self.str(d)),
            _ => self.date(0),
        }
    }

    fn cmp(&mut self) -> &'static str {
        ["=", "!=", "<", "<=", ">", ">="][self.pick(6)]
    }

    pub fn pred(&mut self, depth: u32) -> String {
        let d = depth.saturating_sub(1);
        let n = if depth == 0 { 8 } else { 12 };
        match self.pick(n) {
            0 => format!("{} {} {}", self.int(d), self.cmp(), self.int(d)),
            1 => format!("{} {} {}", self.str(d), self.cmp(), self.str(d)),
            2 => format!("{} {} {}", self.date(d), self.cmp(), self.date(d)),
            3 => format!("{} {} {}", self.real(d), self.cmp(), self.int(d)),
            4 => {
                let pat = ["a%", "%b", "%b%", "_", "a_%", "%", "", "1%", "-%", "%-", "2000%"][self.pick(11)];
                let not = if self.rng.gen_bool(0.3) { "NOT " } else { "" };
                format!("{} {not}LIKE '{pat}'", self.str(d))
            }
            5 => {
                let not = if self.rng.gen_bool(0.5) { " NOT" } else { "" };
                match self.pick(3) {
                    0 => format!("{} IS{not} NULL", self.int(d)),
                    1 => format!("{} IS{not} NULL", self.str(d)),
                    _ => format!("{} IS{not} NULL", self.date(d)),
                }
            }
            6 => format!("{} BETWEEN {} AND {}", self.int(d), self.int(d), self.int(d)),
            7 => format!("{} IN ({}, {}, {})", self.int(d), self.int(d), self.int(d), self.int(d)),
            8 => format!("NOT ({})", self.pred(d)),
            9 => format!("({}) AND ({})", self.pred(d), self.pred(d)),
            10 => format!("({}) OR ({})", self.pred(d), self.pred(d)),
            _ => format!("{} IN ('a', '', s)", self.str(d)),
        }
    }

    /// A single-column query exercising one random expression or
    /// predicate.
    pub fn query(&mut self) -> String {
        let depth = self.rng.gen_range(1..=3);
        match self.pick(5) {
            0 => format!("SELECT {} FROM R", self.int(depth)),
            1 => format!("SELECT {} FROM R", self.str(depth)),
            2 => format!("SELECT {} FROM R", self.date(depth)),
            3 => format!("SELECT {} FROM R", self.real(depth)),
            _ => format!("SELECT id FROM R WHERE {}", self.pred(depth)),
        }
    }
}

pub const PAIR_SCHEMA: &str = r#"{"tables":[
  {"name":"R","columns":[{"name":"a","type":"int"},{"name":"b","type":"str"}]},
  {"name":"S","columns":[{"name":"c","type":"int"}]}
]}"#;

/// Random query pairs over `R(a, b)` and `S(c)`: the second query is a
/// mutation or a rewrite of the first, so both outcomes are common.
pub struct PairGen<'r> {
    pub rng: &'r mut ChaCha8Rng,
}

impl PairGen<'_> {
    fn pick(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    fn int_lit(&mut self) -> i64 {
        self.rng.gen_range(-1..=2)
    }

    fn cmp(&mut self) -> &'static str {
        ["=", "!=", "<", "<=", ">", ">="][self.pick(6)]
    }

    fn pred(&mut self, depth: u32) -> String {
        let leaf = depth == 0 || self.rng.gen_bool(0.5);
        if leaf {
            return match self.pick(6) {
                0 | 1 => format!("a {} {}", self.cmp(), self.int_lit()),
                2 => format!("b = '{}'", ["a", "b", ""][self.pick(3)]),
                3 => format!("b LIKE '{}'", ["a%", "%b", "_"][self.pick(3)]),
                4 => ["a IS NULL", "b IS NULL", "a IS NOT NULL"][self.pick(3)].into(),
                _ => format!("a IN (SELECT c FROM S WHERE c {} {})", self.cmp(), self.int_lit()),
            };
        }
        match self.pick(3) {
            0 => format!("({}) AND ({})", self.pred(depth - 1), self.pred(depth - 1)),
            1 => format!("({}) OR ({})", self.pred(depth - 1), self.pred(depth - 1)),
            _ => format!("NOT ({})", self.pred(depth - 1)),
        }
    }

    /// Replaces one comparison operator or constant in `p`, or leaves it
    /// alone.
    fn mutate_pred(&mut self, p: &str) -> String {
        let swaps: &[(&str, &str)] = &[
            (" < ", " <= "),
            (" <= ", " < "),
            (" > ", " >= "),
            (" >= ", " > "),
            (" = ", " != "),
            (" != ", " = "),
            (" AND ", " OR "),
            (" OR ", " AND "),
            ("1", "2"),
            ("0", "1"),
            ("'a'", "'b'"),
            ("IS NULL", "IS NOT NULL"),
        ];
        let candidates: Vec<_> = swaps.iter().filter(|(a, _)| p.contains(a)).collect();
        if candidates.is_empty() || self.rng.gen_bool(0.2) {
            return p.to_string();
        }
        let (a, b) = candidates.choose(self.rng).unwrap();
        p.replacen(a, b, 1)
    }

    pub fn pair(&mut self) -> (String, String) {
        let p = self.pred(2);
        let m = self.mutate_pred(&p);
        match self.pick(14) {
            0 => (format!("SELECT a, b FROM R WHERE {p}"), format!("SELECT a, b FROM R WHERE {m}")),
            1 => (format!("SELECT a FROM R WHERE {p}"), format!("SELECT DISTINCT a FROM R WHERE {m}")),
            2 => (format!("SELECT COUNT(*) FROM R WHERE {p}"), format!("SELECT COUNT(a) FROM R WHERE {m}")),
            3 => (format!("SELECT MAX(a) FROM R WHERE {p}"), format!("SELECT a FROM R WHERE {m} ORDER BY a DESC LIMIT 1")),
            4 => (format!("SELECT SUM(a) FROM R WHERE {p}"), format!("SELECT SUM(a) FROM R WHERE {m}")),
            5 => (
                "SELECT a, COUNT(*) FROM R GROUP BY a".to_string(),
                format!("SELECT a, COUNT(*) FROM R WHERE {m} GROUP BY a"),
            ),
            6 => (
                format!("SELECT R.a FROM R JOIN S ON R.a = S.c WHERE {p}"),
                format!("SELECT a FROM R WHERE a IN (SELECT c FROM S) AND {m}"),
            ),
            7 => {
                let ops = ["UNION", "INTERSECT", "EXCEPT", "UNION ALL"];
                let (o1, o2) = (ops[self.pick(4)], ops[self.pick(4)]);
                (
                    format!("SELECT a FROM R {o1} SELECT c FROM S"),
                    format!("SELECT a FROM R {o2} SELECT c FROM S"),
                )
            }
            8 => (format!("SELECT b FROM R WHERE {p} ORDER BY a LIMIT 1"), format!("SELECT b FROM R WHERE {m} ORDER BY a LIMIT 1")),
            9 => (
                format!("SELECT a FROM R WHERE {p} AND a NOT IN (SELECT c FROM S)"),
                format!("SELECT a FROM R WHERE {m} EXCEPT SELECT c FROM S"),
            ),
            10 => (
                format!("SELECT R.a, S.c FROM R LEFT JOIN S ON R.a = S.c WHERE {p}"),
                format!("SELECT R.a, S.c FROM R JOIN S ON R.a = S.c WHERE {m}"),
            ),
            11 => (
                format!("SELECT b, MIN(a) FROM R WHERE {p} GROUP BY b"),
                format!("SELECT b, MIN(a) FROM R WHERE {m} GROUP BY b HAVING COUNT(*) > 0"),
            ),
            12 => (format!("SELECT a FROM R WHERE NOT ({p})"), format!("SELECT a FROM R EXCEPT SELECT a FROM R WHERE {m}")),
            _ => (
                format!("SELECT a + 1 FROM R WHERE {p}"),
                format!("SELECT CASE WHEN a IS NULL THEN NULL ELSE a + 1 END FROM R WHERE {m}"),
            ),
        }
    }
}
