//! Brute-force bounded equivalence over small value pools.
//!
//! Databases are enumerated by index in a mixed radix: each table picks a
//! row sequence of length `0..=k` (duplicate rows allowed), each cell a
//! pool value or NULL. Shorter sequences come first.

use thiserror::Error;

use crate::db::{ConcreteDb, Row, TableData};
use crate::eval::ex_compare;
use crate::schema::{DatabaseSchema, SqlType, TableSchema};
use crate::sql::ast::Query;
use crate::value::{Date, EvalError, Value};

pub const DEFAULT_CEILING: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub ints: Vec<i64>,
    pub strs: Vec<String>,
    pub dates: Vec<Date>,
    /// Most rows per table.
    pub k: usize,
    /// Largest candidate count `enumerate_dbs` accepts.
    pub ceiling: u128,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec {
            ints: vec![0, 1, 2],
            strs: ["", "a", "+-", "-"].iter().map(|s| s.to_string()).collect(),
            dates: vec![
                Date::new(2000, 1, 1).expect("valid"),
                Date::new(2000, 2, 29).expect("valid"),
            ],
            k: 1,
            ceiling: DEFAULT_CEILING,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("{count} candidate databases exceed the ceiling of {ceiling}")]
    CeilingExceeded { count: String, ceiling: u128 },
    #[error("empty {0} pool")]
    EmptyPool(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl DomainSpec {
    /// Every column type the schema uses needs a non-empty pool.
    fn validate(&self, schema: &DatabaseSchema) -> Result<(), OracleError> {
        for c in schema.tables.iter().flat_map(|t| &t.columns) {
            let (empty, name) = match c.ty {
                SqlType::Int => (self.ints.is_empty(), "int"),
                SqlType::Str => (self.strs.is_empty(), "string"),
                SqlType::Date => (self.dates.is_empty(), "date"),
            };
            if empty {
                return Err(OracleError::EmptyPool(name));
            }
        }
        Ok(())
    }

    /// Cell values of a column, NULL first.
    fn values(&self, ty: SqlType) -> Vec<Value> {
        let mut out = vec![Value::Null];
        match ty {
            SqlType::Int => out.extend(self.ints.iter().map(|&i| Value::Int(i))),
            SqlType::Str => out.extend(self.strs.iter().map(|s| Value::Str(s.clone()))),
            SqlType::Date => out.extend(self.dates.iter().map(|&d| Value::Date(d))),
        }
        out
    }
}

struct TableSpace {
    name: String,
    arity: usize,
    columns: Vec<Vec<Value>>,
    /// Distinct rows.
    rows: u128,
    /// Row sequences of length 0..=k.
    total: u128,
}

impl TableSpace {
    fn row_at(&self, mut i: u128) -> Row {
        let mut row = Vec::with_capacity(self.arity);
        for vals in self.columns.iter().rev() {
            let n = vals.len() as u128;
            row.push(vals[(i % n) as usize].clone());
            i /= n;
        }
        row.reverse();
        row
    }

    fn table_at(&self, mut i: u128) -> TableData {
        let mut len = 0u32;
        let mut block = 1u128;
        while i >= block {
            i -= block;
            len += 1;
            block *= self.rows;
        }
        let mut rows = Vec::with_capacity(len as usize);
        for _ in 0..len {
            rows.push(self.row_at(i % self.rows));
            i /= self.rows;
        }
        rows.reverse();
        TableData {
            name: self.name.clone(),
            arity: self.arity,
            rows,
        }
    }
}

/// Every database over a domain spec, addressable by index.
pub struct DbSpace {
    schema: DatabaseSchema,
    tables: Vec<TableSpace>,
    count: u128,
}

impl DbSpace {
    pub fn new(schema: &DatabaseSchema, spec: &DomainSpec) -> Result<DbSpace, OracleError> {
        spec.validate(schema)?;
        let mut tables = Vec::new();
        let mut count: Option<u128> = Some(1);
        for t in &schema.tables {
            let ts = table_space(t, spec);
            count = count.and_then(|c| c.checked_mul(ts.total?));
            tables.push(TableSpace {
                name: t.name.clone(),
                arity: t.arity(),
                columns: t.columns.iter().map(|c| spec.values(c.ty)).collect(),
                rows: ts.rows,
                total: ts.total.unwrap_or(u128::MAX),
            });
        }
        match count {
            Some(c) if c <= spec.ceiling => Ok(DbSpace {
                schema: schema.clone(),
                tables,
                count: c,
            }),
            _ => Err(OracleError::CeilingExceeded {
                count: count.map_or_else(|| "overflowing".into(), |c| c.to_string()),
                ceiling: spec.ceiling,
            }),
        }
    }

    /// Number of candidates, including ones violating a primary key.
    pub fn len(&self) -> u128 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn get(&self, mut index: u128) -> ConcreteDb {
        let mut tables = Vec::with_capacity(self.tables.len());
        for t in self.tables.iter().rev() {
            tables.push(t.table_at(index % t.total));
            index /= t.total;
        }
        tables.reverse();
        ConcreteDb { tables }
    }

    /// Candidates in `range` that satisfy the schema's keys.
    pub fn shard(&self, range: std::ops::Range<u128>) -> impl Iterator<Item = ConcreteDb> + '_ {
        range
            .filter(|&i| i < self.count)
            .map(|i| self.get(i))
            .filter(|db| db.conforms(&self.schema).is_ok())
    }

    pub fn iter(&self) -> impl Iterator<Item = ConcreteDb> + '_ {
        self.shard(0..self.count)
    }
}

struct Counts {
    rows: u128,
    total: Option<u128>,
}

fn table_space(t: &TableSchema, spec: &DomainSpec) -> Counts {
    let rows = t
        .columns
        .iter()
        .map(|c| spec.values(c.ty).len() as u128)
        .try_fold(1u128, |a, n| a.checked_mul(n));
    let Some(rows) = rows else {
        return Counts { rows: u128::MAX, total: None };
    };
    let mut total = Some(0u128);
    let mut block = Some(1u128);
    for _ in 0..=spec.k {
        total = total.zip(block).and_then(|(t, b)| t.checked_add(b));
        block = block.and_then(|b| b.checked_mul(rows));
    }
    Counts { rows, total }
}

/// Every database over the pools with at most `k` rows per table, in a
/// fixed order. Databases violating a declared primary key are skipped.
pub fn enumerate_dbs(schema: &DatabaseSchema, spec: &DomainSpec) -> Result<Vec<ConcreteDb>, OracleError> {
    Ok(DbSpace::new(schema, spec)?.iter().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleVerdict {
    Equivalent,
    NotEquivalent(ConcreteDb),
}

/// Compares the two queries on every database of the domain and returns
/// the first one on which their row sets differ.
pub fn oracle_check(
    schema: &DatabaseSchema,
    q1: &Query,
    q2: &Query,
    spec: &DomainSpec,
) -> Result<OracleVerdict, OracleError> {
    let space = DbSpace::new(schema, spec)?;
    for db in space.iter() {
        if !ex_compare(q1, q2, &db)? {
            return Ok(OracleVerdict::NotEquivalent(db));
        }
    }
    Ok(OracleVerdict::Equivalent)
}
