//! The non-equivalence formula and decoding of its models.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use super::expr::{rows_eq, Payload, SymVal};
use super::query::encode_query;
use super::{alloc_symbolic_db, assignment_for_db, EncodeError, EncodeOptions, SymDb, SymRelation};
use crate::db::{ConcreteDb, TableData};
use crate::eval::Relation;
use crate::schema::DatabaseSchema;
use crate::smt::{smtlib, Assignment, Lit, Store, Term};
use crate::sql::ast::{Expr, Pred, Query};
use crate::value::{Date, Value};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("model value out of range: {0}")]
    OutOfRange(String),
    #[error("model gives an invalid date {0}-{1}-{2}")]
    BadDate(BigInt, BigInt, BigInt),
    #[error("model gives a real with zero denominator")]
    ZeroDenominator,
}

/// Two queries encoded over one symbolic database, with the assertions
/// whose models are databases telling them apart.
pub struct Formula {
    pub store: Store,
    pub db: SymDb,
    pub gold: SymRelation,
    pub gen: SymRelation,
    pub assertions: Vec<Term>,
}

impl Formula {
    /// Excludes `db` from the models.
    pub fn block(&mut self, db: &ConcreteDb) {
        let Some(asg) = assignment_for_db(&self.db, db) else {
            // larger than the bound, so never a model anyway
            return;
        };
        let s = &mut self.store;
        let mut same = Vec::new();
        for (st, t) in self.db.tables.iter().zip(&db.tables) {
            for (ri, (&a, cells)) in st.alive.iter().zip(&st.cells).enumerate() {
                if ri >= t.rows.len() {
                    same.push(s.not(a));
                    // the prefix constraint covers later tuples
                    break;
                }
                same.push(a);
                for c in cells {
                    let null = asg[&c.null].as_bool();
                    if null {
                        same.push(c.null);
                        continue;
                    }
                    same.push(s.not(c.null));
                    for p in &c.payload {
                        let v = s.lit(asg[p].clone());
                        same.push(s.eq(*p, v));
                    }
                }
            }
        }
        let all = s.and(same);
        let b = s.not(all);
        self.assertions.push(b);
    }

    pub fn smtlib(&self) -> String {
        smtlib::script(&self.store, &self.assertions, &self.db.vars())
    }
}

fn any_alive(s: &mut Store, r: &SymRelation) -> Term {
    s.or(r.tuples.iter().map(|t| t.alive).collect())
}

/// Every present tuple of `a` has an equal present tuple in `b`.
fn contained(s: &mut Store, a: &SymRelation, b: &SymRelation) -> Term {
    let mut conj = Vec::with_capacity(a.len());
    for t in &a.tuples {
        let hits: Vec<Term> = b
            .tuples
            .iter()
            .map(|u| {
                let eq = rows_eq(s, &t.vals, &u.vals);
                s.and2(u.alive, eq)
            })
            .collect();
        let found = s.or(hits);
        conj.push(s.implies(t.alive, found));
    }
    s.and(conj)
}

/// Holds exactly when the two relations contain the same set of rows.
/// Relations of different arity only agree when both are empty.
pub fn set_equiv_constraint(s: &mut Store, a: &SymRelation, b: &SymRelation) -> Term {
    if a.arity != b.arity {
        let ea = any_alive(s, a);
        let eb = any_alive(s, b);
        let either = s.or2(ea, eb);
        return s.not(either);
    }
    let ab = contained(s, a, b);
    let ba = contained(s, b, a);
    s.and2(ab, ba)
}

/// One side empty while every row of the other is entirely NULL.
fn degenerate(s: &mut Store, empty: &SymRelation, other: &SymRelation) -> Term {
    let e = any_alive(s, empty);
    let is_empty = s.not(e);
    let nonempty = any_alive(s, other);
    let all_null: Vec<Term> = other
        .tuples
        .iter()
        .map(|t| {
            let nulls: Vec<Term> = t.vals.iter().map(|v| v.null).collect();
            let row_null = s.and(nulls);
            s.implies(t.alive, row_null)
        })
        .collect();
    let all_null = s.and(all_null);
    s.and(vec![is_empty, nonempty, all_null])
}

/// Builds the formula satisfied by the `k`-bounded databases on which
/// `gold` and `gen` return different row sets.
pub fn nonequivalence_formula(
    schema: &DatabaseSchema,
    gold: &Query,
    gen: &Query,
    k: usize,
    opts: &EncodeOptions,
) -> Result<Formula, EncodeError> {
    // a cell must be able to equal every constant the queries mention
    let longest = longest_literal(gold).max(longest_literal(gen));
    let widened;
    let opts = if longest > opts.max_str_len {
        widened = EncodeOptions {
            max_str_len: longest,
            ..opts.clone()
        };
        &widened
    } else {
        opts
    };
    let mut store = Store::new();
    let db = alloc_symbolic_db(&mut store, schema, k, opts)?;
    let g = encode_query(&mut store, &db, gold, opts, "g")?;
    let p = encode_query(&mut store, &db, gen, opts, "p")?;
    let mut assertions = db.constraints.clone();
    assertions.extend(g.constraints);
    assertions.extend(p.constraints);
    let eq = set_equiv_constraint(&mut store, &g.result, &p.result);
    assertions.push(store.not(eq));
    if opts.exclude_degenerate {
        let a = degenerate(&mut store, &g.result, &p.result);
        let b = degenerate(&mut store, &p.result, &g.result);
        let either = store.or2(a, b);
        assertions.push(store.not(either));
    }
    Ok(Formula {
        store,
        db,
        gold: g.result,
        gen: p.result,
        assertions,
    })
}

/// Length in characters of the longest string constant in `q`.
pub fn longest_literal(q: &Query) -> usize {
    let mut n = 0;
    walk_query(q, &mut |s| n = n.max(s.chars().count()));
    n
}

fn walk_query(q: &Query, f: &mut dyn FnMut(&str)) {
    match q {
        Query::Table { .. } | Query::Unit => {}
        Query::Project { input, items } => {
            walk_query(input, f);
            items.iter().for_each(|a| walk_expr(&a.expr, f));
        }
        Query::Filter { input, pred } => {
            walk_query(input, f);
            walk_pred(pred, f);
        }
        Query::Rename { input, .. } | Query::Distinct(input) => walk_query(input, f),
        Query::Collection { lhs, rhs, .. } => {
            walk_query(lhs, f);
            walk_query(rhs, f);
        }
        Query::Join { lhs, rhs, on, .. } => {
            walk_query(lhs, f);
            walk_query(rhs, f);
            if let Some(p) = on {
                walk_pred(p, f);
            }
        }
        Query::GroupBy {
            input,
            keys,
            items,
            having,
        } => {
            walk_query(input, f);
            keys.iter().for_each(|e| walk_expr(e, f));
            items.iter().for_each(|a| walk_expr(&a.expr, f));
            if let Some(p) = having {
                walk_pred(p, f);
            }
        }
        Query::OrderBy { input, keys, .. } => {
            walk_query(input, f);
            keys.iter().for_each(|k| walk_expr(&k.expr, f));
        }
    }
}

fn walk_expr(e: &Expr, f: &mut dyn FnMut(&str)) {
    match e {
        Expr::Col { .. } => {}
        Expr::Lit(Value::Str(s)) => f(s),
        Expr::Lit(_) => {}
        Expr::Arith(_, a, b) => {
            walk_expr(a, f);
            walk_expr(b, f);
        }
        Expr::Ite(p, a, b) => {
            walk_pred(p, f);
            walk_expr(a, f);
            walk_expr(b, f);
        }
        Expr::Case { whens, else_ } => {
            for (p, v) in whens {
                walk_pred(p, f);
                walk_expr(v, f);
            }
            walk_expr(else_, f);
        }
        Expr::SubStr(a, b, c) => {
            walk_expr(a, f);
            walk_expr(b, f);
            if let Some(c) = c {
                walk_expr(c, f);
            }
        }
        Expr::Strftime(_, a)
        | Expr::JulianDay(a)
        | Expr::ToInt(a)
        | Expr::ToDate(a)
        | Expr::ToStr(a)
        | Expr::ToReal(a) => walk_expr(a, f),
        Expr::Pred(p) => walk_pred(p, f),
        Expr::Agg { arg, .. } => {
            if let Some(a) = arg {
                walk_expr(a, f);
            }
        }
        Expr::Scalar(q) => walk_query(q, f),
    }
}

fn walk_pred(p: &Pred, f: &mut dyn FnMut(&str)) {
    match p {
        Pred::Bool(_) | Pred::Null => {}
        Pred::Cmp(_, a, b) => {
            walk_expr(a, f);
            walk_expr(b, f);
        }
        Pred::IsNull(a) | Pred::Truth(a) => walk_expr(a, f),
        Pred::InList(a, list) => {
            walk_expr(a, f);
            list.iter().for_each(|e| walk_expr(e, f));
        }
        Pred::InQuery(a, q) => {
            walk_expr(a, f);
            walk_query(q, f);
        }
        Pred::And(a, b) | Pred::Or(a, b) => {
            walk_pred(a, f);
            walk_pred(b, f);
        }
        Pred::Not(a) => walk_pred(a, f),
        Pred::PrefixOf(s, a) | Pred::SuffixOf(s, a) | Pred::Like(s, a) => {
            f(s);
            walk_expr(a, f);
        }
    }
}

fn small_int(i: &BigInt) -> Result<i64, DecodeError> {
    i.to_i64().ok_or_else(|| DecodeError::OutOfRange(i.to_string()))
}

fn decode_date(y: &BigInt, m: &BigInt, d: &BigInt) -> Result<Date, DecodeError> {
    let bad = || DecodeError::BadDate(y.clone(), m.clone(), d.clone());
    match (y.to_i64(), m.to_i64(), d.to_i64()) {
        (Some(y), Some(m), Some(d)) => Date::new(y, m, d).ok_or_else(bad),
        _ => Err(bad()),
    }
}

fn decode_val(
    store: &Store,
    v: &SymVal,
    asg: &Assignment,
    memo: &mut HashMap<Term, Lit>,
) -> Result<Value, DecodeError> {
    let mut ev = |t: Term| store.eval_memo(t, asg, memo);
    if ev(v.null).as_bool() {
        return Ok(Value::Null);
    }
    Ok(match &v.pay {
        Payload::None => Value::Null,
        Payload::Int(t) => Value::Int(small_int(ev(*t).as_int())?),
        Payload::Str(t) => Value::Str(ev(*t).as_str().to_string()),
        Payload::Real { num, den } => {
            let n = ev(*num).as_int().clone();
            let d = ev(*den).as_int().clone();
            if d.is_zero() {
                return Err(DecodeError::ZeroDenominator);
            }
            Value::Real(BigRational::new(n, d))
        }
        Payload::Date { y, m, d } => {
            let (y, m, d) = (ev(*y), ev(*m), ev(*d));
            Value::Date(decode_date(y.as_int(), m.as_int(), d.as_int())?)
        }
    })
}

/// The concrete database a model denotes.
pub fn decode_database(schema: &DatabaseSchema, db: &SymDb, asg: &Assignment) -> Result<ConcreteDb, DecodeError> {
    let mut tables = Vec::with_capacity(db.tables.len());
    for (st, ts) in db.tables.iter().zip(&schema.tables) {
        let mut rows = Vec::new();
        for (a, tuple) in st.alive.iter().zip(&st.rel.tuples) {
            let present = asg.get(a).map_or(false, Lit::as_bool);
            if !present {
                break;
            }
            let mut row = Vec::with_capacity(tuple.vals.len());
            for v in &tuple.vals {
                row.push(decode_cell(v, asg)?);
            }
            rows.push(row);
        }
        tables.push(TableData {
            name: ts.name.clone(),
            arity: ts.arity(),
            rows,
        });
    }
    Ok(ConcreteDb { tables })
}

/// Base-table cells are bare variables, so they decode without the store.
fn decode_cell(v: &SymVal, asg: &Assignment) -> Result<Value, DecodeError> {
    let get = |t: &Term| asg.get(t).cloned();
    if get(&v.null).map_or(false, |l| l.as_bool()) {
        return Ok(Value::Null);
    }
    let int = |t: &Term| get(t).map_or_else(BigInt::zero, |l| l.as_int().clone());
    Ok(match &v.pay {
        Payload::Int(t) => Value::Int(small_int(&int(t))?),
        Payload::Str(t) => Value::Str(get(t).map_or_else(String::new, |l| l.as_str().to_string())),
        Payload::Date { y, m, d } => Value::Date(decode_date(&int(y), &int(m), &int(d))?),
        Payload::None | Payload::Real { .. } => Value::Null,
    })
}

/// Evaluates a symbolic result under a model, in result order.
pub fn decode_relation(store: &Store, rel: &SymRelation, asg: &Assignment) -> Result<Relation, DecodeError> {
    let mut memo = HashMap::new();
    let alive: Vec<usize> = (0..rel.len())
        .filter(|&i| store.eval_memo(rel.tuples[i].alive, asg, &mut memo).as_bool())
        .collect();
    let mut ranked = Vec::with_capacity(alive.len());
    for &i in &alive {
        let rank = alive
            .iter()
            .filter(|&&j| j != i && store.eval_memo(rel.prec[j][i], asg, &mut memo).as_bool())
            .count();
        ranked.push((rank, i));
    }
    ranked.sort();
    let mut rows = Vec::with_capacity(ranked.len());
    for (_, i) in ranked {
        let mut row = Vec::with_capacity(rel.arity);
        for v in &rel.tuples[i].vals {
            row.push(decode_val(store, v, asg, &mut memo)?);
        }
        rows.push(row);
    }
    Ok(Relation { arity: rel.arity, rows })
}
