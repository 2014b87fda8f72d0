//! The symbolic encoding, evaluated under the assignment denoting a
//! concrete database, must produce exactly what the reference evaluator
//! produces on that database: same rows, same order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sqlcex::db::ConcreteDb;
use sqlcex::encode::{alloc_symbolic_db, assignment_for_db, decode_database, decode_relation, encode_query, EncodeOptions};
use sqlcex::eval::eval_query;
use sqlcex::schema::{load_schema, DatabaseSchema, SqlType};
use sqlcex::smt::Store;
use sqlcex::sql::parse_sql;
use sqlcex::value::{Date, Value};

const SCHEMA: &str = r#"{"tables":[
  {"name":"R","columns":[{"name":"id","type":"int"},{"name":"s","type":"str"},{"name":"d","type":"date"}]},
  {"name":"S","columns":[{"name":"id","type":"int"},{"name":"v","type":"int"}],"primary_key":["id"]}
]}"#;

const QUERIES: &[&str] = &[
    "SELECT * FROM R",
    "SELECT id FROM R WHERE id > 1",
    "SELECT id, s FROM R WHERE s = 'a' OR s LIKE '%-'",
    "SELECT s FROM R WHERE s LIKE 'a_%'",
    "SELECT R.id + 1, R.id - v, R.id * 2 FROM R JOIN S ON R.id = S.id",
    "SELECT id / 2, id % 3 FROM R",
    "SELECT v / id FROM S",
    "SELECT DISTINCT s FROM R",
    "SELECT id FROM R UNION SELECT v FROM S",
    "SELECT id FROM R UNION ALL SELECT v FROM S",
    "SELECT id FROM R INTERSECT SELECT v FROM S",
    "SELECT id FROM R EXCEPT SELECT v FROM S",
    "SELECT R.id, S.v FROM R LEFT JOIN S ON R.id = S.id",
    "SELECT R.s, S.v FROM R, S WHERE R.id < S.v",
    "SELECT COUNT(*) FROM R",
    "SELECT COUNT(s), COUNT(DISTINCT s), MIN(s), MAX(d) FROM R",
    "SELECT SUM(id), AVG(id), MIN(id) FROM R",
    "SELECT id, COUNT(*) FROM R GROUP BY id",
    "SELECT s, SUM(id) FROM R GROUP BY s HAVING COUNT(*) > 1",
    "SELECT id FROM R ORDER BY id",
    "SELECT id, s FROM R ORDER BY s DESC, id LIMIT 2",
    "SELECT id FROM R ORDER BY d LIMIT 1 OFFSET 1",
    "SELECT s FROM R ORDER BY id DESC LIMIT 1",
    "SELECT MAX(id) FROM R",
    "SELECT id FROM R WHERE id IN (SELECT v FROM S)",
    "SELECT id FROM R WHERE id NOT IN (SELECT v FROM S)",
    "SELECT id FROM R WHERE id = (SELECT MAX(v) FROM S)",
    "SELECT id FROM R WHERE id = (SELECT v FROM S ORDER BY v DESC LIMIT 1)",
    "SELECT id FROM R WHERE s IS NULL",
    "SELECT id FROM R WHERE d IS NOT NULL AND d > '2000-01-15'",
    "SELECT STRFTIME('%Y', d), STRFTIME('%m', d), STRFTIME('%d', d) FROM R",
    "SELECT id FROM R WHERE STRFTIME('%Y', d) BETWEEN '1999' AND '2000'",
    "SELECT JULIANDAY(d) - JULIANDAY('2000-01-01') FROM R",
    "SELECT CAST(s AS INTEGER), CAST(id AS TEXT) FROM R",
    "SELECT SUBSTR(s, 2), SUBSTR(s, 1, 1), SUBSTR(s, -1, 2) FROM R",
    "SELECT CASE WHEN id > 1 THEN 'big' WHEN id = 1 THEN 'one' ELSE s END FROM R",
    "SELECT IIF(s = 'a', id, 0), COALESCE(s, 'none'), IFNULL(id, -1) FROM R",
    "SELECT id FROM R WHERE s != '-' OR '+-'",
    "SELECT id FROM R WHERE NOT (id > 0 AND s = 'a')",
    "SELECT id * 1.5 FROM R WHERE id * 1.0 / 2 > 0.5",
    "SELECT CAST(id AS REAL) / 4 FROM R",
    "SELECT COUNT(*) FROM R JOIN S ON R.id = S.id WHERE S.v > 0",
    "SELECT R.id FROM R JOIN S ON R.id = S.id ORDER BY S.v DESC LIMIT 1",
    "SELECT T.id FROM (SELECT id, s FROM R WHERE id > 0) AS T WHERE T.s = 'a'",
    "WITH c AS (SELECT id FROM S WHERE v > 0) SELECT COUNT(*) FROM c",
    "SELECT s, COUNT(DISTINCT id) FROM R GROUP BY s ORDER BY s",
    "SELECT id FROM R ORDER BY s LIMIT 2",
    "SELECT 1 + 2",
    "SELECT id FROM R LIMIT -1",
    "SELECT DISTINCT id FROM R ORDER BY id DESC LIMIT 1",
    "SELECT MAX(id) FROM R WHERE id > 100",
];

fn schema() -> DatabaseSchema {
    load_schema(SCHEMA).unwrap()
}

fn random_value(rng: &mut ChaCha8Rng, ty: SqlType) -> Value {
    if rng.gen_bool(0.15) {
        return Value::Null;
    }
    match ty {
        SqlType::Int => Value::Int(rng.gen_range(-1..4)),
        SqlType::Str => {
            let pool = ["", "a", "+-", "-", "ab", "10", "B"];
            Value::str(pool[rng.gen_range(0..pool.len())])
        }
        SqlType::Date => {
            let pool = [(2000, 1, 1), (2000, 2, 29), (1999, 12, 31), (2000, 1, 20), (1995, 6, 5)];
            let (y, m, d) = pool[rng.gen_range(0..pool.len())];
            Value::Date(Date::new(y, m, d).unwrap())
        }
    }
}

fn random_db(rng: &mut ChaCha8Rng, schema: &DatabaseSchema, k: usize) -> ConcreteDb {
    loop {
        let rows = schema
            .tables
            .iter()
            .map(|t| {
                let n = rng.gen_range(0..=k);
                (0..n)
                    .map(|_| t.columns.iter().map(|c| random_value(rng, c.ty)).collect())
                    .collect()
            })
            .collect();
        let db = ConcreteDb::from_rows(schema, rows);
        if db.conforms(schema).is_ok() {
            return db;
        }
    }
}

#[test]
fn encoding_matches_evaluator() {
    let schema = schema();
    let k = 3;
    let opts = EncodeOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let dbs: Vec<ConcreteDb> = (0..60).map(|_| random_db(&mut rng, &schema, k)).collect();
    let mut failures = Vec::new();
    let mut compared = 0;
    for sql in QUERIES {
        let q = parse_sql(sql, &schema).unwrap_or_else(|e| panic!("{sql}: {e}"));
        let mut store = Store::new();
        let symdb = alloc_symbolic_db(&mut store, &schema, k, &opts).unwrap();
        let enc = encode_query(&mut store, &symdb, &q, &opts, "q").unwrap_or_else(|e| panic!("{sql}: {e}"));
        for db in &dbs {
            let expected = match eval_query(db, &q) {
                Ok(r) => r,
                Err(_) => continue,
            };
            let asg = assignment_for_db(&symdb, db).unwrap();
            for c in &symdb.constraints {
                assert!(store.eval(*c, &asg).as_bool(), "db violates its own constraints");
            }
            assert_eq!(&decode_database(&schema, &symdb, &asg).unwrap(), db);
            let got = decode_relation(&store, &enc.result, &asg).unwrap();
            compared += 1;
            if got != expected {
                failures.push(format!(
                    "{sql}\n  db: {}\n  expected {:?}\n  got      {:?}",
                    db.insert_script(),
                    expected.rows,
                    got.rows
                ));
                break;
            }
        }
    }
    assert!(failures.is_empty(), "{} mismatches:\n{}", failures.len(), failures.join("\n"));
    eprintln!("{compared} query/database pairs compared");
    assert!(compared >= QUERIES.len() * 40);
}
