//! Concrete databases: the in-memory form, the JSON dump format and the
//! INSERT script used to replay a database into SQLite.
//!
//! A dump looks like
//!
//! ```json
//! {"tables": [
//!   {"name": "R",
//!    "columns": [{"name": "id", "type": "int"}, {"name": "dob", "type": "date"}],
//!    "rows": [[{"int": 2}, {"date": "1997-01-27"}], [{"int": 3}, "null"]]}
//! ]}
//! ```
//!
//! Strings are `{"str": ...}`. Tables appear in schema order.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::schema::{quote_ident, DatabaseSchema, SqlType};
use crate::sql::lexer::{tokenize, Tok};
use crate::value::{parse_iso_date, rational_to_decimal, Value};

pub type Row = Vec<Value>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableData {
    pub name: String,
    pub arity: usize,
    pub rows: Vec<Row>,
}

/// Table contents, one entry per schema table in schema order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ConcreteDb {
    pub tables: Vec<TableData>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DbError {
    #[error("malformed dump: {0}")]
    MalformedDump(String),
    #[error("dump is missing table `{0}`")]
    MissingTable(String),
    #[error("table `{table}` row {row}: {msg}")]
    BadRow { table: String, row: usize, msg: String },
    #[error("insert script error at offset {pos}: {msg}")]
    Script { pos: usize, msg: String },
    #[error("table `{0}` not in the schema")]
    UnknownTable(String),
}

impl ConcreteDb {
    pub fn empty(schema: &DatabaseSchema) -> ConcreteDb {
        ConcreteDb {
            tables: schema
                .tables
                .iter()
                .map(|t| TableData {
                    name: t.name.clone(),
                    arity: t.arity(),
                    rows: Vec::new(),
                })
                .collect(),
        }
    }

    /// Builds a database from per-table rows given in schema order.
    pub fn from_rows(schema: &DatabaseSchema, rows: Vec<Vec<Row>>) -> ConcreteDb {
        let mut db = ConcreteDb::empty(schema);
        for (t, r) in db.tables.iter_mut().zip(rows) {
            t.rows = r;
        }
        db
    }

    pub fn table(&self, name: &str) -> Option<&TableData> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    pub fn total_rows(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len()).sum()
    }

    pub fn max_rows(&self) -> usize {
        self.tables.iter().map(|t| t.rows.len()).max().unwrap_or(0)
    }

    /// Checks arity, cell types and declared primary keys.
    pub fn conforms(&self, schema: &DatabaseSchema) -> Result<(), DbError> {
        if self.tables.len() != schema.tables.len() {
            return Err(DbError::MalformedDump(format!(
                "{} tables, schema has {}",
                self.tables.len(),
                schema.tables.len()
            )));
        }
        for (data, ts) in self.tables.iter().zip(&schema.tables) {
            if !data.name.eq_ignore_ascii_case(&ts.name) {
                return Err(DbError::MissingTable(ts.name.clone()));
            }
            for (i, row) in data.rows.iter().enumerate() {
                let bad = |msg: String| DbError::BadRow {
                    table: ts.name.clone(),
                    row: i,
                    msg,
                };
                if row.len() != ts.arity() {
                    return Err(bad(format!("{} values, expected {}", row.len(), ts.arity())));
                }
                for (v, c) in row.iter().zip(&ts.columns) {
                    let ok = matches!(
                        (v, c.ty),
                        (Value::Null, _)
                            | (Value::Int(_), SqlType::Int)
                            | (Value::Str(_), SqlType::Str)
                            | (Value::Date(_), SqlType::Date)
                    );
                    if !ok {
                        return Err(bad(format!("{} value in {} column `{}`", v.kind_name(), c.ty, c.name)));
                    }
                }
                if !ts.primary_key.is_empty() {
                    if ts.primary_key.iter().any(|&k| row[k].is_null()) {
                        return Err(bad("NULL in primary key".into()));
                    }
                    let key: Vec<&Value> = ts.primary_key.iter().map(|&k| &row[k]).collect();
                    if data.rows[..i]
                        .iter()
                        .any(|r| ts.primary_key.iter().map(|&k| &r[k]).eq(key.iter().copied()))
                    {
                        return Err(bad("duplicate primary key".into()));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_dump_json(&self, schema: &DatabaseSchema) -> String {
        let dump = Dump {
            tables: self
                .tables
                .iter()
                .zip(&schema.tables)
                .map(|(data, ts)| DumpTable {
                    name: ts.name.clone(),
                    columns: ts
                        .columns
                        .iter()
                        .map(|c| DumpColumn {
                            name: c.name.clone(),
                            ty: c.ty.keyword().to_string(),
                        })
                        .collect(),
                    rows: data.rows.iter().map(|r| r.iter().map(cell_to_json).collect()).collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&dump).expect("dump serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of the dump text; identifies a database independent of how
    /// it was found.
    pub fn content_hash(&self, schema: &DatabaseSchema) -> String {
        hex::encode(Sha256::digest(self.to_dump_json(schema).as_bytes()))
    }

    pub fn from_dump_json(text: &str, schema: &DatabaseSchema) -> Result<ConcreteDb, DbError> {
        let dump: Dump = serde_json::from_str(text).map_err(|e| DbError::MalformedDump(e.to_string()))?;
        for t in &dump.tables {
            if schema.table(&t.name).is_none() {
                return Err(DbError::UnknownTable(t.name.clone()));
            }
        }
        let mut tables = Vec::new();
        for ts in &schema.tables {
            let dt = dump
                .tables
                .iter()
                .find(|t| t.name.eq_ignore_ascii_case(&ts.name))
                .ok_or_else(|| DbError::MissingTable(ts.name.clone()))?;
            let mut rows = Vec::new();
            for (i, r) in dt.rows.iter().enumerate() {
                let row = r
                    .iter()
                    .map(cell_from_json)
                    .collect::<Result<Row, String>>()
                    .map_err(|msg| DbError::BadRow {
                        table: ts.name.clone(),
                        row: i,
                        msg,
                    })?;
                rows.push(row);
            }
            tables.push(TableData {
                name: ts.name.clone(),
                arity: ts.arity(),
                rows,
            });
        }
        let db = ConcreteDb { tables };
        db.conforms(schema)?;
        Ok(db)
    }

    /// One `INSERT` per row, tables in schema order. Dates are written as
    /// ISO text.
    pub fn insert_script(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            for row in &t.rows {
                out.push_str("INSERT INTO ");
                out.push_str(&quote_ident(&t.name));
                out.push_str(" VALUES (");
                for (i, v) in row.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&sql_literal(v));
                }
                out.push_str(");\n");
            }
        }
        out
    }

    /// Reads a script of `INSERT INTO t [(cols)] VALUES (...), ...;`
    /// statements. `CREATE`, `BEGIN`, `COMMIT` and `PRAGMA` statements are
    /// skipped. Values in date columns must be ISO dates or NULL.
    pub fn from_insert_script(text: &str, schema: &DatabaseSchema) -> Result<ConcreteDb, DbError> {
        let toks = tokenize(text).map_err(|e| DbError::Script {
            pos: e.pos(),
            msg: e.to_string(),
        })?;
        let mut db = ConcreteDb::empty(schema);
        let mut p = 0;
        let err = |pos: usize, msg: &str| DbError::Script {
            pos,
            msg: msg.to_string(),
        };
        let word = |t: &Tok, w: &str| matches!(t, Tok::Word(x) if x.eq_ignore_ascii_case(w));
        while toks[p].tok != Tok::Eof {
            if toks[p].tok == Tok::Semi {
                p += 1;
                continue;
            }
            if !word(&toks[p].tok, "INSERT") {
                // skip to the end of the statement, respecting parentheses
                let mut depth = 0i32;
                while toks[p].tok != Tok::Eof && !(toks[p].tok == Tok::Semi && depth == 0) {
                    match toks[p].tok {
                        Tok::LParen => depth += 1,
                        Tok::RParen => depth -= 1,
                        _ => {}
                    }
                    p += 1;
                }
                continue;
            }
            p += 1;
            if !word(&toks[p].tok, "INTO") {
                return Err(err(toks[p].pos, "expected INTO"));
            }
            p += 1;
            let name = match &toks[p].tok {
                Tok::Word(w) | Tok::Quoted(w) => w.clone(),
                _ => return Err(err(toks[p].pos, "expected a table name")),
            };
            let ti = schema.table_index(&name).ok_or(DbError::UnknownTable(name.clone()))?;
            let ts = &schema.tables[ti];
            p += 1;
            let mut order: Vec<usize> = (0..ts.arity()).collect();
            if toks[p].tok == Tok::LParen {
                order.clear();
                p += 1;
                loop {
                    let cname = match &toks[p].tok {
                        Tok::Word(w) | Tok::Quoted(w) => w.clone(),
                        _ => return Err(err(toks[p].pos, "expected a column name")),
                    };
                    let ci = ts
                        .column_index(&cname)
                        .ok_or_else(|| err(toks[p].pos, &format!("unknown column {cname}")))?;
                    order.push(ci);
                    p += 1;
                    match toks[p].tok {
                        Tok::Comma => p += 1,
                        Tok::RParen => {
                            p += 1;
                            break;
                        }
                        _ => return Err(err(toks[p].pos, "expected `,` or `)`")),
                    }
                }
            }
            if !word(&toks[p].tok, "VALUES") {
                return Err(err(toks[p].pos, "expected VALUES"));
            }
            p += 1;
            loop {
                if toks[p].tok != Tok::LParen {
                    return Err(err(toks[p].pos, "expected `(`"));
                }
                p += 1;
                let mut row = vec![Value::Null; ts.arity()];
                let mut n = 0;
                loop {
                    let pos = toks[p].pos;
                    let neg = toks[p].tok == Tok::Minus;
                    if neg {
                        p += 1;
                    }
                    let raw = match &toks[p].tok {
                        Tok::Number(s) => {
                            let s = if neg { format!("-{s}") } else { s.clone() };
                            Value::Int(s.parse().map_err(|_| err(pos, "expected an integer"))?)
                        }
                        Tok::Str(s) if !neg => Value::Str(s.clone()),
                        Tok::Word(w) if !neg && w.eq_ignore_ascii_case("NULL") => Value::Null,
                        _ => return Err(err(pos, "expected a literal value")),
                    };
                    p += 1;
                    let ci = *order.get(n).ok_or_else(|| err(pos, "too many values"))?;
                    let col = &ts.columns[ci];
                    row[ci] = match (raw, col.ty) {
                        (Value::Null, _) => Value::Null,
                        (v @ Value::Int(_), SqlType::Int) | (v @ Value::Str(_), SqlType::Str) => v,
                        (Value::Int(i), SqlType::Str) => Value::Str(i.to_string()),
                        (Value::Str(s), SqlType::Date) => match parse_iso_date(&s) {
                            Some(d) => Value::Date(d),
                            None => return Err(err(pos, &format!("`{s}` is not an ISO date"))),
                        },
                        (v, ty) => {
                            return Err(err(pos, &format!("{} value for {} column `{}`", v.kind_name(), ty, col.name)))
                        }
                    };
                    n += 1;
                    match toks[p].tok {
                        Tok::Comma => p += 1,
                        Tok::RParen => {
                            p += 1;
                            break;
                        }
                        _ => return Err(err(toks[p].pos, "expected `,` or `)`")),
                    }
                }
                if n != order.len() {
                    return Err(err(toks[p].pos, "too few values"));
                }
                db.tables[ti].rows.push(row);
                if toks[p].tok == Tok::Comma {
                    p += 1;
                } else {
                    break;
                }
            }
        }
        db.conforms(schema)?;
        Ok(db)
    }
}

/// SQL literal text for a value.
pub fn sql_literal(v: &Value) -> String {
    match v {
        Value::Null => "NULL".into(),
        Value::Int(i) => i.to_string(),
        Value::Real(r) => rational_to_decimal(r),
        Value::Str(s) => format!("'{}'", s.replace('\'', "''")),
        Value::Date(d) => format!("'{d}'"),
    }
}

#[derive(Serialize, Deserialize)]
struct Dump {
    tables: Vec<DumpTable>,
}

#[derive(Serialize, Deserialize)]
struct DumpTable {
    name: String,
    #[serde(default)]
    columns: Vec<DumpColumn>,
    rows: Vec<Vec<serde_json::Value>>,
}

#[derive(Serialize, Deserialize)]
struct DumpColumn {
    name: String,
    #[serde(rename = "type")]
    ty: String,
}

fn cell_to_json(v: &Value) -> serde_json::Value {
    use serde_json::json;
    match v {
        Value::Null => json!("null"),
        Value::Int(i) => json!({ "int": i }),
        Value::Real(r) => json!({ "real": rational_to_decimal(r) }),
        Value::Str(s) => json!({ "str": s }),
        Value::Date(d) => json!({ "date": d.to_string() }),
    }
}

fn cell_from_json(j: &serde_json::Value) -> Result<Value, String> {
    if j.as_str() == Some("null") {
        return Ok(Value::Null);
    }
    let obj = j.as_object().filter(|o| o.len() == 1).ok_or_else(|| format!("bad cell {j}"))?;
    let (tag, v) = obj.iter().next().expect("one entry");
    match tag.as_str() {
        "int" => v.as_i64().map(Value::Int).ok_or_else(|| format!("bad int cell {j}")),
        "str" => v.as_str().map(Value::str).ok_or_else(|| format!("bad str cell {j}")),
        "date" => v
            .as_str()
            .and_then(parse_iso_date)
            .map(Value::Date)
            .ok_or_else(|| format!("bad date cell {j}")),
        _ => Err(format!("unknown cell tag `{tag}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::load_schema;

    fn schema() -> DatabaseSchema {
        load_schema(
            r#"{"tables":[{"name":"R","columns":[{"name":"id","type":"int"},{"name":"dob","type":"date"},{"name":"s","type":"str"}]}]}"#,
        )
        .unwrap()
    }

    fn sample() -> ConcreteDb {
        ConcreteDb::from_rows(
            &schema(),
            vec![vec![
                vec![Value::Int(2), Value::date(1997, 1, 27), Value::str("it's")],
                vec![Value::Null, Value::Null, Value::str("")],
            ]],
        )
    }

    #[test]
    fn dump_round_trip() {
        let s = schema();
        let db = sample();
        let text = db.to_dump_json(&s);
        assert_eq!(ConcreteDb::from_dump_json(&text, &s).unwrap(), db);
        assert_eq!(db.content_hash(&s), sample().content_hash(&s));
    }

    #[test]
    fn insert_script_round_trip() {
        let s = schema();
        let db = sample();
        let script = format!("{}BEGIN;\n{}COMMIT;\n", s.create_script(), db.insert_script());
        assert_eq!(ConcreteDb::from_insert_script(&script, &s).unwrap(), db);
        let multi = "INSERT INTO R (s, id) VALUES ('x', -3), (NULL, 4);";
        let got = ConcreteDb::from_insert_script(multi, &s).unwrap();
        assert_eq!(got.tables[0].rows[0], vec![Value::Int(-3), Value::Null, Value::str("x")]);
        assert_eq!(got.tables[0].rows[1], vec![Value::Int(4), Value::Null, Value::Null]);
    }

    #[test]
    fn missing_table_is_named() {
        let s = schema();
        let err = ConcreteDb::from_dump_json(r#"{"tables":[]}"#, &s).unwrap_err();
        assert_eq!(err, DbError::MissingTable("R".into()));
        assert!(err.to_string().contains('R'));
    }
}
